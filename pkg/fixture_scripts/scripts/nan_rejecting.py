#!/usr/bin/env python3
"""Black box that refuses NaN inputs by exiting nonzero.

Models real solvers that validate their inputs: a NaN-contamination probe
against this program must observe the failure and give up (or fall back
to finite differences) rather than read a pattern out of it.
"""

import math
import sys

import npwire


def f(x):
    if len(x) != 2:
        raise SystemExit("nan_rejecting expects 2 inputs")
    if any(math.isnan(v) for v in x):
        print("NaN input rejected", file=sys.stderr)
        sys.exit(3)
    return [x[0] * x[0] + x[1], x[0] * x[1]]


if __name__ == "__main__":
    npwire.serve(f)
