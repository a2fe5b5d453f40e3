#!/usr/bin/env python3
"""Lower-triangular 2x2 matrix-vector product.

Accumulation skips structural zeros explicitly: a dense dot product would
compute 0 * NaN = NaN and hide the zero structure from a NaN-based probe.
"""

import npwire

A = ((1.0, 0.0), (1.0, 1.0))


def f(x):
    if len(x) != 2:
        raise SystemExit("matvec expects 2 inputs")
    out = []
    for row in A:
        acc = 0.0
        for a, v in zip(row, x):
            if a != 0.0:
                acc = acc + a * v
        out.append(acc)
    return out


if __name__ == "__main__":
    npwire.serve(f)
