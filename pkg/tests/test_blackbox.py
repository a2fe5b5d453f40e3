import math
import sys

import numpy as np
import pytest

from nanprop.blackbox import (
    BlackBoxSpec,
    Evaluator,
    FailureKind,
    InProcess,
    InputKind,
    InputSpec,
    Subprocess,
    evaluate,
    fixture_spec,
    list_fixtures,
    pack_request,
    pack_request_hex,
    pack_response,
    parse_response_hex,
    unpack_request,
)
from nanprop.payload import bits_to_float, encode, float_to_bits
from nanprop.pattern import DEP, ZERO, SparsityPattern

ECHO_SCRIPT = """\
import struct, sys
data = sys.stdin.buffer.read()
assert data[:4] == b"NP1!"
(n,) = struct.unpack_from("<I", data, 4)
values = struct.unpack_from(f"<{n}d", data, 8)
out = b"NP1!" + struct.pack("<BI", 0, n) + struct.pack(f"<{n}d", *values)
sys.stdout.buffer.write(out)
"""

SUM_PAIR_SCRIPT = """\
import struct, sys
data = sys.stdin.buffer.read()
(n,) = struct.unpack_from("<I", data, 4)
x = struct.unpack_from(f"<{n}d", data, 8)
y = x[0] + x[1]
sys.stdout.buffer.write(b"NP1!" + struct.pack("<BI", 0, 1) + struct.pack("<d", y))
"""

SLEEP_SCRIPT = "import time; time.sleep(600)\n"

PERSISTENT_ECHO_SCRIPT = """\
import struct, sys
while True:
    head = sys.stdin.buffer.read(8)
    if len(head) < 8:
        break
    (n,) = struct.unpack_from("<I", head, 4)
    body = sys.stdin.buffer.read(8 * n)
    values = struct.unpack(f"<{n}d", body)
    sys.stdout.buffer.write(b"NP1!" + struct.pack("<BI", 0, n) + struct.pack(f"<{n}d", *values))
    sys.stdout.buffer.flush()
"""

HEX_ECHO_SCRIPT = """\
import sys
lines = sys.stdin.read().split()
n = int(lines[1])
vals = lines[2:2 + n]
print(f"NP1! 0 {n}")
for v in vals:
    print(v)
"""


def script_spec(
    tmp_path, source, n_inputs, n_outputs,
    name="bb.py", framing="binary", persistent=False, timeout=60.0,
):
    path = tmp_path / name
    path.write_text(source)
    return BlackBoxSpec(
        n_inputs=n_inputs,
        n_outputs=n_outputs,
        inputs=tuple(InputSpec(f"x{j}", initial=1.0) for j in range(n_inputs)),
        invocation=Subprocess(
            argv=(sys.executable, str(path)), framing=framing, persistent=persistent
        ),
        timeout=timeout,
    )


class TestFraming:
    def test_binary_round_trip(self):
        values = [1.0, -0.0, math.inf, encode(12345)]
        back = unpack_request(pack_request(values))
        assert [float_to_bits(v) for v in back] == [float_to_bits(v) for v in values]

    def test_hex_round_trip(self):
        values = [3.5, encode(99), -1e-300]
        text = pack_response_hex_like(values)
        status, back = parse_response_hex(text)
        assert status == 0
        assert [float_to_bits(v) for v in back] == [float_to_bits(v) for v in values]

    def test_malformed_request_rejected(self):
        with pytest.raises(ValueError):
            unpack_request(b"XXXX\x00\x00\x00\x00")
        with pytest.raises(ValueError):
            unpack_request(pack_request([1.0]) + b"extra")


def pack_response_hex_like(values):
    from nanprop.blackbox import pack_response_hex

    return pack_response_hex(0, values)


class TestInProcess:
    def test_sum_pair(self):
        result = evaluate(fixture_spec("sum_pair"), [1.0, 2.0])
        assert result.ok and result.outputs.tolist() == [3.0]

    def test_sum_pair_nan_contaminates(self):
        result = evaluate(fixture_spec("sum_pair"), [encode(0), 2.0])
        assert result.ok and math.isnan(result.outputs[0])

    def test_domain_error_classified(self):
        result = evaluate(fixture_spec("nan_rejecting"), [math.nan, 1.0])
        assert not result.ok
        assert result.failure.kind is FailureKind.RAISED_ERROR

    def test_input_arity_checked(self):
        with pytest.raises(ValueError):
            evaluate(fixture_spec("sum_pair"), [1.0])


class TestSubprocess:
    def test_echo_preserves_payload_bits(self, tmp_path):
        spec = script_spec(tmp_path, ECHO_SCRIPT, 3, 3)
        x = [encode(12345), 1.5, -0.0]
        result = evaluate(spec, x)
        assert result.ok
        assert [float_to_bits(float(v)) for v in result.outputs] == [
            float_to_bits(v) for v in x
        ]

    def test_echo_bit_exact_on_random_patterns(self, tmp_path):
        # 10^4 random 64-bit patterns, incl. NaNs, zeros, infs, subnormals
        rng = np.random.default_rng(11)
        bits = rng.integers(0, 1 << 64, size=10_000, dtype=np.uint64)
        special = np.array(
            [0, 1 << 63, 0x7FF0000000000000, 0xFFF0000000000000,
             0x7FF8000000000000, 0x0000000000000001, 0x000FFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        bits[: special.size] = special
        spec = script_spec(tmp_path, ECHO_SCRIPT, 500, 500)
        with Evaluator(spec) as ev:
            for chunk in bits.reshape(20, 500):
                x = [bits_to_float(int(b)) for b in chunk]
                result = ev(x)
                assert result.ok
                got = [float_to_bits(float(v)) for v in result.outputs]
                assert got == [int(b) for b in chunk]

    def test_in_process_and_subprocess_agree_bitwise(self, tmp_path):
        spec = script_spec(tmp_path, SUM_PAIR_SCRIPT, 2, 1)
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.uniform(-10, 10, size=2)
            sub = evaluate(spec, x)
            inp = evaluate(fixture_spec("sum_pair"), x)
            assert sub.ok and inp.ok
            assert float_to_bits(float(sub.outputs[0])) == float_to_bits(
                float(inp.outputs[0])
            )

    def test_nonzero_exit_is_raised_error(self, tmp_path):
        spec = script_spec(tmp_path, "import sys; sys.exit(3)\n", 1, 1)
        result = evaluate(spec, [1.0])
        assert result.failure.kind is FailureKind.RAISED_ERROR

    def test_garbage_output_is_protocol_error(self, tmp_path):
        spec = script_spec(tmp_path, "print('hello')\n", 1, 1)
        result = evaluate(spec, [1.0])
        assert result.failure.kind is FailureKind.PROTOCOL_ERROR

    def test_timeout(self, tmp_path):
        spec = script_spec(tmp_path, SLEEP_SCRIPT, 1, 1)
        spec = BlackBoxSpec(
            spec.n_inputs, spec.n_outputs, spec.inputs, spec.invocation, timeout=0.5
        )
        result = evaluate(spec, [1.0])
        assert result.failure.kind is FailureKind.TIMEOUT

    def test_persistent_mode_reuses_process(self, tmp_path):
        spec = script_spec(
            tmp_path, PERSISTENT_ECHO_SCRIPT, 2, 2, persistent=True
        )
        with Evaluator(spec) as ev:
            for k in range(5):
                result = ev([float(k), encode(k)])
                assert result.ok
                assert float_to_bits(float(result.outputs[1])) == float_to_bits(
                    encode(k)
                )
            first_proc = ev._proc
            assert first_proc is ev._proc

    def test_hex_mode_bit_exact(self, tmp_path):
        spec = script_spec(tmp_path, HEX_ECHO_SCRIPT, 3, 3, framing="hex")
        x = [encode(7), -0.0, 2.5]
        result = evaluate(spec, x)
        assert result.ok
        assert [float_to_bits(float(v)) for v in result.outputs] == [
            float_to_bits(v) for v in x
        ]


class TestFixtureRegistry:
    REQUIRED = [
        "square_at_zero", "self_cancel", "trig_identity", "matvec",
        "two_mode_wing", "nan_rejecting", "nan_overwriting", "surrogate38",
    ]

    def test_required_fixtures_present(self):
        names = {fx.name for fx in list_fixtures()}
        for req in self.REQUIRED:
            assert req in names

    def test_matvec_ground_truth(self):
        from nanprop.fixtures import get

        assert get("matvec").ground_truth == SparsityPattern.from_rows(
            [[DEP, ZERO], [DEP, DEP]]
        )

    def test_self_cancel_ground_truth_is_zero(self):
        from nanprop.fixtures import get

        assert get("self_cancel").ground_truth == SparsityPattern.from_rows([[ZERO]])

    def test_surrogate38_ground_truth_matches_term_supports(self):
        # the fixture's declared pattern must equal the supports of its own
        # expression terms, recomputed independently here
        from nanprop import fixtures as fx

        cells = np.full((fx.SURROGATE38_M, fx.SURROGATE38_N), ZERO, dtype=np.uint8)
        for term in fx._surrogate38_terms():
            if term[0] == "lin":
                cells[term[1], term[2]] = DEP
            elif term[0] == "prod":
                cells[term[1], term[2]] = DEP
                cells[term[1], term[3]] = DEP
            else:
                cells[term[1], term[2]] = DEP
        assert fx.get("surrogate38").ground_truth == SparsityPattern(cells)

    def test_flag_inputs_are_integer_valued(self):
        for fx in list_fixtures():
            for spec in fx.inputs:
                if spec.kind is InputKind.FLAG:
                    assert spec.initial == int(spec.initial)
