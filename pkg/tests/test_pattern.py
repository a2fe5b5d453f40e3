import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanprop.pattern import (
    DEP,
    UNKNOWN,
    ZERO,
    PatternFormatError,
    SparsityPattern,
    compare,
    gramian_adjacency,
    parse,
    serialize,
    union,
)

P = SparsityPattern.from_rows


def random_pattern(rng, m, n, values=(ZERO, UNKNOWN, DEP)):
    return SparsityPattern(rng.choice(values, size=(m, n)).astype(np.uint8))


patterns = st.integers(1, 6).flatmap(
    lambda m: st.integers(1, 6).flatmap(
        lambda n: st.lists(
            st.lists(st.sampled_from([ZERO, UNKNOWN, DEP]), min_size=n, max_size=n),
            min_size=m,
            max_size=m,
        ).map(P)
    )
)


def brute_force_adjacency(p, unknown_as=DEP):
    effective = {DEP, UNKNOWN} if unknown_as == DEP else {DEP}
    n = p.n_inputs
    adj = np.zeros((n, n), dtype=bool)
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            for i in range(p.n_outputs):
                if p.cells[i, j] in effective and p.cells[i, k] in effective:
                    adj[j, k] = True
                    break
    return adj


class TestGramianAdjacency:
    def test_identity_pattern_has_no_adjacencies(self):
        adj = gramian_adjacency(P([[DEP, ZERO], [ZERO, DEP]]))
        assert not adj.adjacent.any()

    def test_shared_row_is_adjacent(self):
        adj = gramian_adjacency(P([[DEP, DEP]]))
        assert adj.adjacent[0][1] and adj.adjacent[1][0]

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("unknown_as", [DEP, ZERO])
    def test_matches_brute_force_on_random_8x8(self, seed, unknown_as):
        rng = np.random.default_rng(seed)
        p = random_pattern(rng, 8, 8)
        adj = gramian_adjacency(p, unknown_as=unknown_as)
        assert (adj.adjacent == brute_force_adjacency(p, unknown_as)).all()

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_force_up_to_16x16(self, seed):
        rng = np.random.default_rng(100 + seed)
        m, n = rng.integers(1, 17, size=2)
        p = random_pattern(rng, m, n)
        adj = gramian_adjacency(p)
        assert (adj.adjacent == brute_force_adjacency(p)).all()


class TestUnion:
    def test_idempotent(self):
        p = P([[DEP, ZERO], [UNKNOWN, DEP]])
        assert union(p, p) == p

    def test_dominance(self):
        assert union(P([[ZERO]]), P([[DEP]])) == P([[DEP]])
        assert union(P([[ZERO]]), P([[UNKNOWN]])) == P([[UNKNOWN]])
        assert union(P([[UNKNOWN]]), P([[DEP]])) == P([[DEP]])

    def test_two_mode_fixture_union_matches_cellwise_oracle(self):
        from nanprop.fixtures import get

        modes = get("two_mode_wing").mode_patterns
        a, b = modes["cantilever"], modes["strut"]
        got = union(a, b)
        rank = {ZERO: 0, UNKNOWN: 1, DEP: 2}
        inv = {v: k for k, v in rank.items()}
        for i in range(a.n_outputs):
            for j in range(a.n_inputs):
                expected = inv[max(rank[int(a.cells[i, j])], rank[int(b.cells[i, j])])]
                assert int(got.cells[i, j]) == expected

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            union(P([[ZERO]]), P([[ZERO, ZERO]]))

    @given(patterns, patterns.filter(lambda p: True))
    @settings(max_examples=60)
    def test_commutative_when_dims_match(self, a, b):
        if a.cells.shape != b.cells.shape:
            return
        assert union(a, b) == union(b, a)

    @given(patterns)
    @settings(max_examples=40)
    def test_never_downgrades_dep(self, a):
        rng = np.random.default_rng(0)
        b = random_pattern(rng, a.n_outputs, a.n_inputs)
        merged = union(a, b)
        assert ((a.cells != DEP) | (merged.cells == DEP)).all()


class TestCompare:
    def test_equal_patterns_empty_report(self):
        p = P([[DEP, ZERO], [UNKNOWN, DEP]])
        assert compare(p, p).is_empty()

    def test_single_false_negative(self):
        report = compare(P([[DEP]]), P([[ZERO]]))
        assert report.false_negative_cells == [(0, 0)]
        assert report.false_negative_count == 1
        assert report.extra_dep_cells == []

    def test_swapped_arguments_swap_categories(self):
        rng = np.random.default_rng(7)
        a = random_pattern(rng, 5, 5, values=(ZERO, DEP))
        b = random_pattern(rng, 5, 5, values=(ZERO, DEP))
        fwd, rev = compare(a, b), compare(b, a)
        assert sorted(fwd.false_negative_cells) == sorted(rev.extra_dep_cells)
        assert sorted(fwd.extra_dep_cells) == sorted(rev.false_negative_cells)


class TestSerialization:
    def test_round_trip_with_unknown(self):
        p = P([[DEP, ZERO], [UNKNOWN, DEP]])
        text = serialize(p)
        assert text.splitlines()[1] == "10"
        assert text.splitlines()[2] == "?1"
        assert parse(text) == p

    def test_empty_pattern_round_trips(self):
        p = SparsityPattern(np.zeros((0, 0), dtype=np.uint8))
        assert parse(serialize(p)) == p

    def test_37x38_random_round_trips(self):
        rng = np.random.default_rng(42)
        p = random_pattern(rng, 37, 38)
        assert parse(serialize(p)) == p

    @given(patterns)
    @settings(max_examples=80)
    def test_parse_serialize_identity(self, p):
        assert parse(serialize(p)) == p

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "garbage\n",
            "nanprop-pattern v1 2 2\n10\n",  # missing row
            "nanprop-pattern v1 1 2\n101\n",  # wrong row length
            "nanprop-pattern v1 1 1\n2\n",  # bad character
        ],
    )
    def test_malformed_rejected(self, text):
        with pytest.raises(PatternFormatError):
            parse(text)

    def test_completed_trace_has_no_unknown(self):
        # invariant hook: one-hot produced patterns never carry UNKNOWN
        from nanprop import fixture_spec, trace_onehot

        report = trace_onehot(fixture_spec("matvec"))
        assert not report.pattern.has_unknown()
