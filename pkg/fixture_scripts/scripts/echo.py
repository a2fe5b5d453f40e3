#!/usr/bin/env python3
"""Identity black box: outputs are the inputs, bit for bit."""

import npwire

if __name__ == "__main__":
    npwire.serve(lambda x: x)
