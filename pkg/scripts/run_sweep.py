#!/usr/bin/env python3
"""Cross-validate along the reconstruction-weight grid (default) or the
dropout grid:

    python3 scripts/run_sweep.py lam
    python3 scripts/run_sweep.py dropout -o folds=5
"""
import sys

from lpdgcn.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["lam"]
    param, rest = args[0], args[1:]
    sys.exit(main(["sweep", param, "-o", f"out_dir=runs/sweep_{param}"] + rest))
