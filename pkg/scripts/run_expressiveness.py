#!/usr/bin/env python3
"""Fit the full training set for 350 epochs and write the loss/accuracy
curves (train.csv) for plotting. The curves record the end-of-epoch
eval-mode state, so they are deterministic given the seed.
"""
import sys

from lpdgcn.cli import main

if __name__ == "__main__":
    sys.exit(main(["train", "-o", "out_dir=runs/expressiveness"] + sys.argv[1:]))
