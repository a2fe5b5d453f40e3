"""Quiet-NaN payload codec for binary64.

Column indices are embedded in the low 51 mantissa bits of a quiet NaN:

    sign=0 | exponent=all ones | quiet bit=1 | 51-bit payload

The quiet bit is always set, so a zero payload can never alias to +inf and
signaling NaNs are never produced.
"""

from __future__ import annotations

import enum
import math
import struct
from typing import NamedTuple

#: Bit pattern of the canonical quiet NaN with zero payload.
BASE_BITS = 0x7FF8_0000_0000_0000

#: Usable payload width with the quiet bit reserved.
PAYLOAD_BITS = 51

#: Number of distinct encodable column indices.
PAYLOAD_CAPACITY = 1 << PAYLOAD_BITS

_PAYLOAD_MASK = PAYLOAD_CAPACITY - 1
_QUIET_BIT = 1 << 51
_SIGN_BIT = 1 << 63
_EXP_MASK = 0x7FF0_0000_0000_0000
_MANTISSA_MASK = (1 << 52) - 1


class DecodeKind(enum.Enum):
    NOT_NAN = "not_nan"
    RECOGNIZED = "recognized"
    FOREIGN_NAN = "foreign_nan"


class Decoded(NamedTuple):
    kind: DecodeKind
    index: int | None = None


NOT_NAN = Decoded(DecodeKind.NOT_NAN)
FOREIGN_NAN = Decoded(DecodeKind.FOREIGN_NAN)


def float_to_bits(v: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", v))[0]


def bits_to_float(bits: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


def encode(index: int) -> float:
    """Quiet NaN whose low 51 mantissa bits carry `index`."""
    if not 0 <= index < PAYLOAD_CAPACITY:
        raise ValueError(f"payload index {index} out of range [0, 2^{PAYLOAD_BITS})")
    return bits_to_float(BASE_BITS | index)


def decode(v: float) -> Decoded:
    """Classify a value as NotNan, Recognized(index), or ForeignNan.

    Recognized requires the exact encoder shape: sign 0, quiet bit set.
    Everything else that is NaN (signaling, negative-sign) is foreign.
    Whether a recognized index was actually seeded is the caller's call.
    """
    if not math.isnan(v):
        return NOT_NAN
    bits = float_to_bits(v)
    if bits & _SIGN_BIT or not bits & _QUIET_BIT:
        return FOREIGN_NAN
    return Decoded(DecodeKind.RECOGNIZED, bits & _PAYLOAD_MASK)
