#!/usr/bin/env python3
"""Per-element reconstruction of a radial shear modulus with constant lam."""

import sys

from elastinv.cli import main

if __name__ == "__main__":
    sys.exit(main(["example2", *sys.argv[1:]]))
