#!/usr/bin/env python3
"""Check the monotonicity sandwich and Loewner ordering over random ordered pairs."""

import sys

from elastinv.cli import main

if __name__ == "__main__":
    sys.exit(main(["monotonicity", *sys.argv[1:]]))
