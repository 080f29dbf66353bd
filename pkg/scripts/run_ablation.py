#!/usr/bin/env python3
"""Cross-validate the full model and the three single-ingredient removals
(no reconstruction loss, no dense connections, no global context) under a
shared fold plan and seed, then print the accuracy table.
"""
import sys

from lpdgcn.cli import main

if __name__ == "__main__":
    sys.exit(main(["ablate", "-o", "out_dir=runs/ablation"] + sys.argv[1:]))
