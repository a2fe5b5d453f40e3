#!/usr/bin/env python3
"""Seven inputs (six continuous, one mode flag), six outputs.

The flag at index 6 selects between two dependency structures: values
<= 1.0 give independent cantilever terms, anything else couples inputs
3..5 through strut terms. A NaN flag compares false and lands in the
strut branch without contaminating the outputs.
"""

import math

import npwire

FLAG_INDEX = 6


def f(x):
    if len(x) != 7:
        raise SystemExit("two_mode_wing expects 7 inputs")
    cantilever = x[FLAG_INDEX] <= 1.0
    f0 = x[0] * x[0] + 2.0 * x[1]
    f1 = 3.0 * x[1]
    f2 = math.sin(x[2])
    if cantilever:
        f3 = x[3] * x[3]
        f4 = 2.0 * x[4]
        f5 = x[5] + 1.0
    else:
        f3 = x[3] + x[4] * x[5]
        f4 = x[3] * x[4]
        f5 = x[4] + x[5] * x[5]
    return [f0, f1, f2, f3, f4, f5]


if __name__ == "__main__":
    npwire.serve(f)
