import math
import warnings

import numpy as np
import pytest

from nanprop.payload import (
    BASE_BITS,
    PAYLOAD_CAPACITY,
    DecodeKind,
    decode,
    encode,
    float_to_bits,
)


def test_encode_zero_is_canonical_quiet_nan():
    assert float_to_bits(encode(0)) == 0x7FF8_0000_0000_0000


def test_encode_five():
    assert float_to_bits(encode(5)) == 0x7FF8_0000_0000_0005


def test_capacity_at_least_2_to_51():
    assert PAYLOAD_CAPACITY >= 1 << 51


def test_encode_is_nan_for_random_indices():
    rng = np.random.default_rng(1)
    for k in rng.integers(0, PAYLOAD_CAPACITY, size=1000):
        assert math.isnan(encode(int(k)))


def test_round_trip_exhaustive_low_range():
    for k in range(1 << 20):
        bits = BASE_BITS | k
        assert bits & ((1 << 51) - 1) == k
    # spot-check through the actual float boundary on a coarser sweep
    for k in range(0, 1 << 20, 997):
        d = decode(encode(k))
        assert d.kind is DecodeKind.RECOGNIZED and d.index == k


def test_round_trip_sampled_full_range():
    rng = np.random.default_rng(2)
    for k in rng.integers(0, PAYLOAD_CAPACITY, size=10_000):
        d = decode(encode(int(k)))
        assert d.kind is DecodeKind.RECOGNIZED and d.index == int(k)


def test_decode_ordinary_value():
    assert decode(1.0).kind is DecodeKind.NOT_NAN
    assert decode(0.0).kind is DecodeKind.NOT_NAN
    assert decode(math.inf).kind is DecodeKind.NOT_NAN


def test_native_division_nan_is_never_not_nan():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        native = float(np.float64(0.0) / np.float64(0.0))
    d = decode(native)
    assert d.kind in (DecodeKind.FOREIGN_NAN, DecodeKind.RECOGNIZED)
    if d.kind is DecodeKind.RECOGNIZED:
        assert d.index == 0


def test_signaling_and_negative_nans_are_foreign():
    import struct

    def f(bits):
        return struct.unpack("<d", struct.pack("<Q", bits))[0]

    signaling = f(0x7FF0_0000_0000_0001)  # quiet bit clear
    negative = f(0xFFF8_0000_0000_0007)
    assert decode(signaling).kind is DecodeKind.FOREIGN_NAN
    assert decode(negative).kind is DecodeKind.FOREIGN_NAN


def test_encoded_values_never_infinite():
    rng = np.random.default_rng(3)
    samples = [0, 1, PAYLOAD_CAPACITY - 1] + [
        int(k) for k in rng.integers(0, PAYLOAD_CAPACITY, size=200)
    ]
    for k in samples:
        v = encode(k)
        assert not math.isinf(v)
        assert math.isnan(v)
        assert v != v  # NaN inequality under IEEE comparison


def test_out_of_range_rejected():
    with pytest.raises(ValueError):
        encode(-1)
    with pytest.raises(ValueError):
        encode(PAYLOAD_CAPACITY)
