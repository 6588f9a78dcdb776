#!/usr/bin/env python3
"""Per-element reconstruction of a two-bump lam field; localizes the bumps."""

import sys

from elastinv.cli import main

if __name__ == "__main__":
    sys.exit(main(["example3", *sys.argv[1:]]))
