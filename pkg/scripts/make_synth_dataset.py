#!/usr/bin/env python3
"""Write the bundled synthetic benchmark to disk in the four-file text
format, so it can be inspected or fed back through the file parser:

    python3 scripts/make_synth_dataset.py [out_root]
"""
import sys

from lpdgcn.data import write_tu_dataset
from lpdgcn.synth import generate_synthetic_dataset

if __name__ == "__main__":
    root = sys.argv[1] if len(sys.argv) > 1 else "data"
    ds = generate_synthetic_dataset()
    path = write_tu_dataset(ds, root)
    print(f"wrote {len(ds.graphs)} graphs ({ds.num_classes} classes, "
          f"{ds.num_node_labels} node labels) under {path}")
