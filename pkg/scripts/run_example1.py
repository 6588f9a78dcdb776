#!/usr/bin/env python3
"""Recover constant Lame parameters (3, 7) at three noise settings."""

import sys

from elastinv.cli import main

if __name__ == "__main__":
    sys.exit(main(["example1", *sys.argv[1:]]))
