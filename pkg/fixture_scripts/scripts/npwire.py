"""NANPROP/1 framing helpers shared by the fixture scripts.

Standard library only, by design: these programs prove the tracer works
against a black box that shares no code with it, so the only common ground
is the wire protocol itself.

Binary frames: request ``NP1!`` + u32le count + count f64le values;
response ``NP1!`` + u8 status + u32le count + values. Hex text frames:
header line ``NP1! <n>`` (request) or ``NP1! <status> <m>`` (response)
followed by one 16-hex-digit value per line, preserving every bit.
"""

import struct
import sys

MAGIC = b"NP1!"


def bits_to_float(bits):
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


def float_to_bits(value):
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def read_request_binary(stream):
    data = stream.read()
    if len(data) < 8 or data[:4] != MAGIC:
        raise ValueError("bad request frame")
    (n,) = struct.unpack_from("<I", data, 4)
    if len(data) != 8 + 8 * n:
        raise ValueError(f"request frame length {len(data)} != {8 + 8 * n}")
    return list(struct.unpack_from(f"<{n}d", data, 8))


def write_response_binary(stream, status, values):
    values = list(values)
    stream.write(
        MAGIC
        + struct.pack("<BI", status, len(values))
        + struct.pack(f"<{len(values)}d", *values)
    )
    stream.flush()


def read_request_hex(stream):
    lines = [ln.strip() for ln in stream.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty hex request")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "NP1!":
        raise ValueError(f"bad hex request header {lines[0]!r}")
    n = int(head[1])
    body = lines[1:]
    if len(body) != n:
        raise ValueError(f"hex request has {len(body)} values, expected {n}")
    return [bits_to_float(int(h, 16)) for h in body]


def write_response_hex(stream, status, values):
    values = list(values)
    lines = [f"NP1! {status} {len(values)}"]
    lines += [format(float_to_bits(v), "016x") for v in values]
    stream.write("\n".join(lines) + "\n")
    stream.flush()


def serve(fn):
    """Read one request frame from stdin, apply fn, write the response.

    Malformed frames exit nonzero; ``--hex`` selects the text framing.
    """
    hex_mode = "--hex" in sys.argv[1:]
    try:
        if hex_mode:
            x = read_request_hex(sys.stdin)
        else:
            x = read_request_binary(sys.stdin.buffer)
    except (ValueError, struct.error) as e:
        print(f"protocol error: {e}", file=sys.stderr)
        sys.exit(1)
    y = fn(x)
    if hex_mode:
        write_response_hex(sys.stdout, 0, y)
    else:
        write_response_binary(sys.stdout.buffer, 0, y)
