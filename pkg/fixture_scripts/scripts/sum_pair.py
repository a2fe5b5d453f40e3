#!/usr/bin/env python3
"""Two inputs, one output: their sum."""

import npwire


def f(x):
    if len(x) != 2:
        raise SystemExit("sum_pair expects 2 inputs")
    return [x[0] + x[1]]


if __name__ == "__main__":
    npwire.serve(f)
