#!/usr/bin/env python3
"""Empirical stability-constant experiment on the quadrant parameter family."""

import sys

from elastinv.cli import main

if __name__ == "__main__":
    sys.exit(main(["stability", *sys.argv[1:]]))
