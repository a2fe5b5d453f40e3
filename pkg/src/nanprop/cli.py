"""Command-line front end.

    nanprop trace    <job.json> [-o pattern.txt]
    nanprop compare  <reference.txt> <candidate.txt> [--figure out.svg]
    nanprop color    <pattern.txt> [-o coloring.txt]
    nanprop jacobian <job.json> <pattern.txt> [-o jac.txt] [--dense]
    nanprop render   <pattern.txt> --format {grid,svg,png} [-o file]
    nanprop session  <job.json> <inputs.txt> [--state-dir DIR] [--resume]

Job files are JSON; unknown keys are rejected. Exit codes: 0 success,
1 usage/config/protocol error, 2 NaN-incompatible black box (marker
NAN_INCOMPATIBLE on stdout so wrappers can fall back to --method fd).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import branching, coloring, fixtures, pattern, render, tracer
from .blackbox import (
    BlackBoxSpec,
    DEFAULT_TIMEOUT_SECS,
    InputKind,
    InputSpec,
    Subprocess,
    fixture_spec,
)
from .tracer import NanIncompatible, TraceError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NAN_INCOMPATIBLE = 2

NAN_INCOMPATIBLE_MARKER = "NAN_INCOMPATIBLE"


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1; code 2 is reserved for NanIncompatible
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _reject_unknown(obj: dict, allowed, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")


_JOB_KEYS = {
    "blackbox", "inputs", "n_outputs", "method", "chunk_size",
    "fd_scheme", "fd_tol", "use_density_prior", "workers", "pattern_out",
}
_BLACKBOX_KEYS = {"fixture", "command", "framing", "persistent", "timeout"}
_INPUT_KEYS = {"name", "kind", "initial"}


class JobConfig:
    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError("job config must be a JSON object")
        _reject_unknown(raw, _JOB_KEYS, "job config")
        bb = raw.get("blackbox")
        if not isinstance(bb, dict):
            raise ConfigError("job config needs a 'blackbox' object")
        _reject_unknown(bb, _BLACKBOX_KEYS, "blackbox")

        timeout = float(bb.get("timeout", DEFAULT_TIMEOUT_SECS))
        env_timeout = os.environ.get("NANPROP_TIMEOUT_SECS")
        if env_timeout is not None:
            timeout = float(env_timeout)

        inputs = None
        if "inputs" in raw:
            inputs = []
            for k, entry in enumerate(raw["inputs"]):
                _reject_unknown(entry, _INPUT_KEYS, f"inputs[{k}]")
                inputs.append(
                    InputSpec(
                        name=str(entry.get("name", f"x{k}")),
                        kind=InputKind(entry.get("kind", "continuous")),
                        initial=float(entry.get("initial", 0.0)),
                    )
                )

        if "fixture" in bb:
            if "command" in bb:
                raise ConfigError("blackbox takes 'fixture' or 'command', not both")
            try:
                spec = fixture_spec(bb["fixture"], timeout=timeout)
            except KeyError as e:
                raise ConfigError(str(e))
            if inputs is not None:
                if len(inputs) != spec.n_inputs:
                    raise ConfigError(
                        f"inputs override has {len(inputs)} entries, "
                        f"fixture has {spec.n_inputs}"
                    )
                spec = BlackBoxSpec(
                    spec.n_inputs, spec.n_outputs, tuple(inputs),
                    spec.invocation, timeout,
                )
            if "n_outputs" in raw and int(raw["n_outputs"]) != spec.n_outputs:
                raise ConfigError("n_outputs disagrees with the fixture")
        elif "command" in bb:
            if inputs is None:
                raise ConfigError("subprocess black boxes need 'inputs'")
            if "n_outputs" not in raw:
                raise ConfigError("subprocess black boxes need 'n_outputs'")
            spec = BlackBoxSpec(
                n_inputs=len(inputs),
                n_outputs=int(raw["n_outputs"]),
                inputs=tuple(inputs),
                invocation=Subprocess(
                    argv=tuple(str(a) for a in bb["command"]),
                    framing=bb.get("framing", "binary"),
                    persistent=bool(bb.get("persistent", False)),
                ),
                timeout=timeout,
            )
        else:
            raise ConfigError("blackbox needs 'fixture' or 'command'")

        self.spec = spec
        self.method = raw.get("method", "onehot")
        if self.method not in ("onehot", "chunked", "payload", "fd"):
            raise ConfigError(f"unknown method {self.method!r}")
        self.chunk_size = int(raw.get("chunk_size", 2))
        self.fd_scheme = raw.get("fd_scheme", "forward")
        self.fd_tol = float(raw.get("fd_tol", 0.0))
        self.use_density_prior = bool(raw.get("use_density_prior", False))
        self.workers = int(raw.get("workers", 1))
        self.pattern_out = raw.get("pattern_out")

    @classmethod
    def from_file(cls, path) -> "JobConfig":
        try:
            with open(path) as f:
                raw = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read job file: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"job file is not valid JSON: {e}")
        return cls(raw)

    def method_knobs(self) -> dict:
        if self.method == "chunked":
            return {"g": self.chunk_size}
        if self.method == "payload":
            return {"use_density_prior": self.use_density_prior}
        if self.method == "fd":
            return {"scheme": self.fd_scheme, "tol": self.fd_tol}
        return {"workers": self.workers}

    def run_trace(self, scheme_override=None):
        knobs = self.method_knobs()
        if scheme_override:
            knobs["scheme"] = scheme_override
        return branching._trace_with(self.method, self.spec, None, **knobs)


def _emit(args, human: str, machine: dict):
    if args.json:
        print(json.dumps(machine, indent=2))
    else:
        print(human)


# ---------------------------------------------------------------------------
# Commands

def cmd_trace(args) -> int:
    config = JobConfig.from_file(args.job)
    report = config.run_trace()
    out_path = args.output or config.pattern_out
    if out_path:
        pattern.save(report.pattern, out_path)
    human = [
        f"method: {report.method}",
        f"eval_count: {report.eval_count}",
        f"pattern: {report.pattern.n_outputs}x{report.pattern.n_inputs}"
        + (f" -> {out_path}" if out_path else ""),
    ]
    for w in report.warnings:
        human.append(f"warning: {w}")
    if not out_path:
        human.append(pattern.serialize(report.pattern).rstrip())
    _emit(
        args,
        "\n".join(human),
        {
            "method": str(report.method),
            "eval_count": report.eval_count,
            "warnings": report.warnings,
            "pattern_file": out_path,
            "pattern": pattern.serialize(report.pattern),
        },
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    ref = pattern.load(args.reference)
    cand = pattern.load(args.candidate)
    diff = pattern.compare(ref, cand)
    marks = diff.false_negative_cells
    grid = render.render_grid(ref, marks=marks)
    human = [
        f"{diff.false_negative_count} false negatives",
        f"{len(diff.extra_dep_cells)} extra dependencies in candidate",
        grid.rstrip(),
    ]
    if args.figure:
        render.render_figure(
            ref, args.figure, marks=marks,
            title=f"{diff.false_negative_count} false negatives",
        )
        human.append(f"figure: {args.figure}")
    _emit(
        args,
        "\n".join(human),
        {
            "false_negative_count": diff.false_negative_count,
            "false_negative_cells": marks,
            "extra_dep_cells": diff.extra_dep_cells,
            "figure": args.figure,
        },
    )
    return EXIT_OK


COLORING_MAGIC = "nanprop-coloring v1"


def cmd_color(args) -> int:
    p = pattern.load(args.pattern)
    col = coloring.color_columns(pattern.gramian_adjacency(p, unknown_as=pattern.DEP))
    ratio = coloring.speedup(p.n_inputs, col.n_colors) if col.n_colors else float("nan")
    if args.output:
        lines = [f"{COLORING_MAGIC} {col.n} {col.n_colors}"]
        lines += [str(int(c)) for c in col.color_of]
        Path(args.output).write_text("\n".join(lines) + "\n")
    human = [
        f"n_inputs: {p.n_inputs}",
        f"n_colors: {col.n_colors}",
        f"speedup: {ratio:.4f}",
        "colors: " + " ".join(str(int(c)) for c in col.color_of),
    ]
    _emit(
        args,
        "\n".join(human),
        {
            "n_inputs": p.n_inputs,
            "n_colors": col.n_colors,
            "speedup": ratio,
            "color_of": [int(c) for c in col.color_of],
            "coloring_file": args.output,
        },
    )
    return EXIT_OK


def cmd_jacobian(args) -> int:
    config = JobConfig.from_file(args.job)
    p = pattern.load(args.pattern)
    if args.dense:
        jac = coloring.dense_jacobian(config.spec, scheme=args.scheme)
        values = {
            (i, j): float(jac[i, j])
            for i in range(jac.shape[0])
            for j in range(jac.shape[1])
        }
        eval_count = (
            config.spec.n_inputs + 1
            if args.scheme == "forward"
            else 2 * config.spec.n_inputs
        )
        n_colors = config.spec.n_inputs
    else:
        cj = coloring.compressed_jacobian(config.spec, pattern=p, scheme=args.scheme)
        values, eval_count, n_colors = cj.values, cj.eval_count, cj.coloring.n_colors
    if args.output:
        lines = [f"{coloring.JAC_MAGIC} {p.n_outputs} {p.n_inputs} {n_colors}"]
        from .payload import float_to_bits

        for (i, j) in sorted(values):
            lines.append(f"{i} {j} {format(float_to_bits(values[(i, j)]), '016x')}")
        Path(args.output).write_text("\n".join(lines) + "\n")
    _emit(
        args,
        f"eval_count: {eval_count}\nentries: {len(values)}"
        + (f"\njacobian: {args.output}" if args.output else ""),
        {
            "eval_count": eval_count,
            "n_entries": len(values),
            "n_colors": n_colors,
            "jacobian_file": args.output,
        },
    )
    return EXIT_OK


def cmd_render(args) -> int:
    p = pattern.load(args.pattern)
    if args.format == "grid":
        grid = render.render_grid(p)
        if args.output:
            Path(args.output).write_text(grid)
        else:
            sys.stdout.write(grid)
    else:
        if not args.output:
            raise ConfigError(f"--format {args.format} needs -o/--output")
        render.render_figure(p, args.output)
    return EXIT_OK


def cmd_session(args) -> int:
    config = JobConfig.from_file(args.job)
    try:
        lines = Path(args.inputs).read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read inputs stream: {e}")
    vectors = []
    for ln in lines:
        if ln.strip():
            vectors.append(np.array([float(tok) for tok in ln.split()]))

    session = branching.TraceSession(
        config.spec, method=config.method, method_knobs=config.method_knobs()
    )
    state_dir = Path(args.state_dir) if args.state_dir else None
    if args.resume:
        if state_dir is None:
            raise ConfigError("--resume needs --state-dir")
        session.resume(state_dir)

    events = []
    for k, x in enumerate(vectors):
        if session.accumulated is None:
            session.init(x)
            events.append((k, session.history[-1].flag_tuple))
        else:
            result = session.observe(x)
            if result.retraced:
                events.append((k, session.history[-1].flag_tuple))
    if state_dir is not None:
        session.save(state_dir)

    human = [f"RETRACED input {k} flags={list(ft)}" for k, ft in events]
    human.append(f"retraces: {len(events)}")
    human.append(f"total_eval_count: {session.total_eval_count}")
    human.append(f"note: {branching.RESIDUAL_RISK_NOTE}")
    for w in session.warnings:
        human.append(f"warning: {w}")
    _emit(
        args,
        "\n".join(human),
        {
            "retraces": len(events),
            "retrace_inputs": [k for k, _ in events],
            "total_eval_count": session.total_eval_count,
            "warnings": session.warnings,
            "residual_risk": branching.RESIDUAL_RISK_NOTE,
            "state_dir": str(state_dir) if state_dir else None,
        },
    )
    return EXIT_OK


def cmd_fixtures(args) -> int:
    rows = []
    for fx in fixtures.list_fixtures():
        rows.append(
            {
                "name": fx.name,
                "n_inputs": fx.n_inputs,
                "n_outputs": fx.n_outputs,
                "branch_free": fx.branch_free,
                "has_ground_truth": fx.ground_truth is not None,
            }
        )
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(
                f"{r['name']:16s} {r['n_inputs']:3d} -> {r['n_outputs']:3d}"
                f"  branch_free={r['branch_free']}"
            )
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nanprop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--json", action="store_true", help="machine-readable summary")
        return p

    p = add("trace", cmd_trace, help="trace a sparsity pattern")
    p.add_argument("job", help="job config JSON")
    p.add_argument("-o", "--output", help="pattern file to write")

    p = add("compare", cmd_compare, help="diff two pattern files")
    p.add_argument("reference")
    p.add_argument("candidate")
    p.add_argument("--figure", help="write an annotated figure (svg/png)")

    p = add("color", cmd_color, help="color a pattern's column graph")
    p.add_argument("pattern")
    p.add_argument("-o", "--output", help="coloring file to write")

    p = add("jacobian", cmd_jacobian, help="compressed Jacobian evaluation")
    p.add_argument("job")
    p.add_argument("pattern")
    p.add_argument("-o", "--output", help="jacobian file to write")
    p.add_argument("--dense", action="store_true", help="full dense FD Jacobian")
    p.add_argument("--scheme", choices=("forward", "central"), default="forward")

    p = add("render", cmd_render, help="render a pattern")
    p.add_argument("pattern")
    p.add_argument("--format", choices=("grid", "svg", "png"), default="grid")
    p.add_argument("-o", "--output")

    p = add("session", cmd_session, help="replay inputs through a trace session")
    p.add_argument("job")
    p.add_argument("inputs", help="one whitespace-separated input vector per line")
    p.add_argument("--state-dir", help="persist/restore session state here")
    p.add_argument("--resume", action="store_true")

    add("fixtures", cmd_fixtures, help="list built-in fixtures")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NanIncompatible as e:
        print(NAN_INCOMPATIBLE_MARKER)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NAN_INCOMPATIBLE
    except (ConfigError, pattern.PatternFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (TraceError, coloring.DecompressionAmbiguity, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
