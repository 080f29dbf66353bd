#!/usr/bin/env python3
"""10-fold stratified cross-validation with the reference recipe.

Equivalent to `lpdgcn cv`; kept as a script so the experiment is one
command. Pass -o key=value to override any config field, e.g.

    python3 scripts/run_cv.py -o dataset=MUTAG -o data_root=data -o jobs=4
"""
import sys

from lpdgcn.cli import main

if __name__ == "__main__":
    sys.exit(main(["cv", "-o", "out_dir=runs/cv"] + sys.argv[1:]))
