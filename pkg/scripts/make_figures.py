#!/usr/bin/env python3
"""Regenerate every benchmark figure CSV from the bundled scenarios.

Usage:
    python scripts/make_figures.py [--out DIR]
"""
import argparse
import sys

from clfgsim import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/figures")
    args = parser.parse_args()
    return cli.main(["figures", "all", "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
