"""Shared helpers for tests that need subprocess black boxes."""

from nanprop.blackbox import BlackBoxSpec, InputSpec, Subprocess

# Sparse accumulation mirrors the in-process matvec fixture: structural
# zeros must not be multiplied against NaN inputs.
MATVEC_SCRIPT = """\
import struct, sys
A = ((1.0, 0.0), (1.0, 1.0))
data = sys.stdin.buffer.read()
assert data[:4] == b"NP1!"
(n,) = struct.unpack_from("<I", data, 4)
x = struct.unpack_from(f"<{n}d", data, 8)
out = []
for row in A:
    acc = 0.0
    for a, v in zip(row, x):
        if a != 0.0:
            acc = acc + a * v
    out.append(acc)
sys.stdout.buffer.write(
    b"NP1!" + struct.pack("<BI", 0, len(out)) + struct.pack(f"<{len(out)}d", *out)
)
"""


def write_matvec_script(tmp_path, python) -> BlackBoxSpec:
    path = tmp_path / "matvec_bb.py"
    path.write_text(MATVEC_SCRIPT)
    return BlackBoxSpec(
        n_inputs=2,
        n_outputs=2,
        inputs=(InputSpec("x1", initial=1.0), InputSpec("x2", initial=1.0)),
        invocation=Subprocess(argv=(python, str(path))),
    )
