"""Uniform evaluation interface over black-box functions.

Supports in-process synthetic fixtures and external subprocesses speaking
the NANPROP/1 wire protocol. The protocol is binary (or 16-hex-digit text
lines) because values must cross the boundary bit-exactly: JSON cannot
carry NaN payloads.

NANPROP/1 per-call framing:

    request  = b"NP1!" + u32le n_inputs  + n_inputs  * f64le
    response = b"NP1!" + u8 status (0=ok, 1=domain error)
             + u32le n_outputs + n_outputs * f64le

Hex text mode replaces each section with lines:
    request:  "NP1! <n_inputs>"          then one 16-hex-digit line per value
    response: "NP1! <status> <n_outputs>" then one 16-hex-digit line per value

Hex digits are the big-endian rendering of the 64-bit pattern, so both
modes are bit-exact by construction. Persistent mode repeats frames on the
same pipes; nonzero exit status means the black box raised.
"""

from __future__ import annotations

import enum
import math
import struct
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .payload import bits_to_float, float_to_bits

MAGIC = b"NP1!"
DEFAULT_TIMEOUT_SECS = 60.0


class InputKind(enum.Enum):
    CONTINUOUS = "continuous"
    FLAG = "flag"


@dataclass(frozen=True)
class InputSpec:
    name: str
    kind: InputKind = InputKind.CONTINUOUS
    initial: float = 0.0

    def __post_init__(self):
        if self.kind is InputKind.FLAG:
            if not math.isfinite(self.initial) or self.initial != int(self.initial):
                raise ValueError(
                    f"flag input {self.name!r} needs an integer-valued initial, "
                    f"got {self.initial}"
                )


@dataclass(frozen=True)
class InProcess:
    fixture: str


@dataclass(frozen=True)
class Subprocess:
    argv: tuple[str, ...]
    framing: str = "binary"  # "binary" | "hex"
    persistent: bool = False

    def __post_init__(self):
        if self.framing not in ("binary", "hex"):
            raise ValueError(f"unknown framing {self.framing!r}")
        object.__setattr__(self, "argv", tuple(self.argv))


@dataclass(frozen=True)
class BlackBoxSpec:
    n_inputs: int
    n_outputs: int
    inputs: tuple[InputSpec, ...]
    invocation: InProcess | Subprocess
    timeout: float = DEFAULT_TIMEOUT_SECS

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(self.inputs) != self.n_inputs:
            raise ValueError(
                f"inputs has length {len(self.inputs)}, expected {self.n_inputs}"
            )
        if self.n_outputs < 1:
            raise ValueError("n_outputs must be >= 1")

    @property
    def x0(self) -> np.ndarray:
        return np.array([s.initial for s in self.inputs], dtype=np.float64)

    def flag_indices(self) -> list[int]:
        return [j for j, s in enumerate(self.inputs) if s.kind is InputKind.FLAG]


class FailureKind(enum.Enum):
    RAISED_ERROR = "raised_error"
    TIMEOUT = "timeout"
    PROTOCOL_ERROR = "protocol_error"


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    detail: str = ""


@dataclass(frozen=True)
class EvalResult:
    outputs: np.ndarray | None = None
    failure: Failure | None = None

    def __post_init__(self):
        if (self.outputs is None) == (self.failure is None):
            raise ValueError("exactly one of outputs/failure must be present")
        if self.outputs is not None:
            out = np.asarray(self.outputs, dtype=np.float64)
            out.flags.writeable = False
            object.__setattr__(self, "outputs", out)

    @property
    def ok(self) -> bool:
        return self.outputs is not None


class FixtureDomainError(Exception):
    """Signals a domain error inside an in-process fixture."""


# ---------------------------------------------------------------------------
# Frame packing

def pack_request(values) -> bytes:
    values = list(values)
    return MAGIC + struct.pack("<I", len(values)) + struct.pack(
        f"<{len(values)}d", *values
    )


def unpack_request(buf: bytes) -> list[float]:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise ValueError("bad request frame")
    (n,) = struct.unpack_from("<I", buf, 4)
    if len(buf) != 8 + 8 * n:
        raise ValueError(f"request frame length {len(buf)} != {8 + 8 * n}")
    return list(struct.unpack_from(f"<{n}d", buf, 8))


def pack_response(status: int, values) -> bytes:
    values = list(values)
    return (
        MAGIC
        + struct.pack("<BI", status, len(values))
        + struct.pack(f"<{len(values)}d", *values)
    )


def pack_request_hex(values) -> str:
    values = list(values)
    lines = [f"NP1! {len(values)}"]
    lines += [format(float_to_bits(v), "016x") for v in values]
    return "\n".join(lines) + "\n"


def pack_response_hex(status: int, values) -> str:
    values = list(values)
    lines = [f"NP1! {status} {len(values)}"]
    lines += [format(float_to_bits(v), "016x") for v in values]
    return "\n".join(lines) + "\n"


def parse_response_hex(text: str) -> tuple[int, list[float]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty hex response")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "NP1!":
        raise ValueError(f"bad hex response header {lines[0]!r}")
    status, m = int(head[1]), int(head[2])
    body = lines[1:]
    if len(body) != m:
        raise ValueError(f"hex response has {len(body)} values, expected {m}")
    return status, [bits_to_float(int(h, 16)) for h in body]


def _read_exact(stream, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise EOFError(f"stream ended {remaining} bytes short")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_response(stream) -> tuple[int, list[float]]:
    head = _read_exact(stream, 9)
    if head[:4] != MAGIC:
        raise ValueError("bad response magic")
    status, m = struct.unpack("<BI", head[4:])
    body = _read_exact(stream, 8 * m)
    return status, list(struct.unpack(f"<{m}d", body))


# ---------------------------------------------------------------------------
# Evaluation

class Evaluator:
    """Callable handle evaluating one BlackBoxSpec.

    Per-call subprocess mode spawns a fresh process per evaluation (a crash
    on NaN must not poison later calls); persistent mode keeps one child on
    open pipes and is single-threaded.
    """

    def __init__(self, spec: BlackBoxSpec):
        self.spec = spec
        self._proc = None
        self._fixture_fn = None
        if isinstance(spec.invocation, InProcess):
            from . import fixtures

            self._fixture_fn = fixtures.get(spec.invocation.fixture).fn

    def __call__(self, x) -> EvalResult:
        x = list(np.asarray(x, dtype=np.float64).tolist())
        if len(x) != self.spec.n_inputs:
            raise ValueError(f"input length {len(x)} != {self.spec.n_inputs}")
        if self._fixture_fn is not None:
            return self._eval_in_process(x)
        if self.spec.invocation.persistent:
            return self._eval_persistent(x)
        return self._eval_per_call(x)

    def _check_outputs(self, outputs) -> EvalResult:
        if len(outputs) != self.spec.n_outputs:
            return EvalResult(
                failure=Failure(
                    FailureKind.PROTOCOL_ERROR,
                    f"got {len(outputs)} outputs, expected {self.spec.n_outputs}",
                )
            )
        return EvalResult(outputs=np.array(outputs, dtype=np.float64))

    def _eval_in_process(self, x) -> EvalResult:
        try:
            outputs = self._fixture_fn(x)
        except FixtureDomainError as e:
            return EvalResult(failure=Failure(FailureKind.RAISED_ERROR, str(e)))
        except (ArithmeticError, ValueError, OverflowError) as e:
            return EvalResult(failure=Failure(FailureKind.RAISED_ERROR, repr(e)))
        return self._check_outputs(list(outputs))

    def _eval_per_call(self, x) -> EvalResult:
        inv = self.spec.invocation
        if inv.framing == "hex":
            payload = pack_request_hex(x).encode()
        else:
            payload = pack_request(x)
        try:
            proc = subprocess.run(
                list(inv.argv),
                input=payload,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=self.spec.timeout,
            )
        except subprocess.TimeoutExpired:
            return EvalResult(failure=Failure(FailureKind.TIMEOUT, "per-call timeout"))
        except OSError as e:
            return EvalResult(failure=Failure(FailureKind.PROTOCOL_ERROR, str(e)))
        if proc.returncode != 0:
            detail = proc.stderr.decode(errors="replace").strip()
            return EvalResult(
                failure=Failure(
                    FailureKind.RAISED_ERROR,
                    f"exit status {proc.returncode}: {detail}",
                )
            )
        try:
            if inv.framing == "hex":
                status, outputs = parse_response_hex(proc.stdout.decode())
            else:
                import io

                status, outputs = read_response(io.BytesIO(proc.stdout))
        except (ValueError, EOFError) as e:
            return EvalResult(failure=Failure(FailureKind.PROTOCOL_ERROR, str(e)))
        if status != 0:
            return EvalResult(
                failure=Failure(FailureKind.RAISED_ERROR, f"status {status}")
            )
        return self._check_outputs(outputs)

    def _ensure_proc(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                list(self.spec.invocation.argv),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        return self._proc

    def _eval_persistent(self, x) -> EvalResult:
        inv = self.spec.invocation
        proc = self._ensure_proc()
        timer = threading.Timer(self.spec.timeout, proc.kill)
        timer.start()
        try:
            if inv.framing == "hex":
                proc.stdin.write(pack_request_hex(x).encode())
                proc.stdin.flush()
                head = proc.stdout.readline().decode()
                parts = head.split()
                if len(parts) != 3 or parts[0] != "NP1!":
                    raise ValueError(f"bad hex response header {head!r}")
                status, m = int(parts[1]), int(parts[2])
                outputs = [
                    bits_to_float(int(proc.stdout.readline(), 16)) for _ in range(m)
                ]
            else:
                proc.stdin.write(pack_request(x))
                proc.stdin.flush()
                status, outputs = read_response(proc.stdout)
        except (ValueError, EOFError, OSError) as e:
            self.close()
            if not timer.is_alive():
                return EvalResult(
                    failure=Failure(FailureKind.TIMEOUT, "persistent timeout")
                )
            code = proc.poll()
            if code not in (None, 0):
                return EvalResult(
                    failure=Failure(FailureKind.RAISED_ERROR, f"exit status {code}")
                )
            return EvalResult(failure=Failure(FailureKind.PROTOCOL_ERROR, str(e)))
        finally:
            timer.cancel()
        if status != 0:
            return EvalResult(
                failure=Failure(FailureKind.RAISED_ERROR, f"status {status}")
            )
        return self._check_outputs(outputs)

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def evaluate(spec: BlackBoxSpec, x) -> EvalResult:
    """One-shot evaluation; opens and closes its own handle."""
    with Evaluator(spec) as ev:
        return ev(x)


def fixture_spec(name: str, timeout: float = DEFAULT_TIMEOUT_SECS) -> BlackBoxSpec:
    """BlackBoxSpec for a registered in-process fixture."""
    from . import fixtures

    fx = fixtures.get(name)
    return BlackBoxSpec(
        n_inputs=fx.n_inputs,
        n_outputs=fx.n_outputs,
        inputs=tuple(fx.inputs),
        invocation=InProcess(name),
        timeout=timeout,
    )


def list_fixtures():
    from . import fixtures

    return fixtures.list_fixtures()
