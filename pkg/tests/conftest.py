import os

import numpy as np
import pytest

from lpdgcn.data import Dataset, Graph, one_hot_features, parse_tu_dataset
from lpdgcn.synth import generate_synthetic_dataset

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def write_tu_files(root, name, edges_1based, indicator, graph_labels, node_labels):
    """Write the four TU dataset files from plain python lists."""
    base = os.path.join(root, name)
    os.makedirs(base, exist_ok=True)
    content = {
        "A": [f"{i}, {j}" for i, j in edges_1based],
        "graph_indicator": [str(v) for v in indicator],
        "graph_labels": [str(v) for v in graph_labels],
        "node_labels": [str(v) for v in node_labels],
    }
    for key, lines in content.items():
        with open(os.path.join(base, f"{name}_{key}.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return base


@pytest.fixture
def tu_writer(tmp_path):
    def write(name="TINY", **kw):
        write_tu_files(str(tmp_path), name, **kw)
        return str(tmp_path), name
    return write


@pytest.fixture(scope="session")
def synth_dataset() -> Dataset:
    return one_hot_features(generate_synthetic_dataset())


@pytest.fixture(scope="session")
def bench_dataset() -> Dataset:
    """The real benchmark when its files are on disk, the bundled synthetic
    stand-in otherwise. Thresholds are identical either way."""
    for root in (os.environ.get("LPDGCN_DATA"), os.path.join(REPO_ROOT, "data")):
        if root and os.path.isdir(os.path.join(root, "MUTAG")):
            return one_hot_features(parse_tu_dataset(root, "MUTAG"))
    print("\n[data] MUTAG files not found under data/ or $LPDGCN_DATA; "
          "substituting the bundled synthetic dataset (same machinery, "
          "same thresholds)")
    return one_hot_features(generate_synthetic_dataset())


def make_two_graph_batch():
    """Triangle plus a single edge, one-hot features, 3 label kinds."""
    from lpdgcn.data import make_batch
    from lpdgcn.synth import fixture_pair
    return make_batch(one_hot_features(fixture_pair()).graphs)


def random_graph(rng: np.random.Generator, max_nodes=8, num_labels=3,
                 label=0) -> Graph:
    n = int(rng.integers(1, max_nodes + 1))
    pairs = [(u, v) for u in range(n) for v in range(u, n)]
    take = [p for p in pairs if rng.random() < 0.4]
    edges = np.asarray(take, dtype=np.int64).reshape(len(take), 2)
    return Graph(node_count=n, edges=edges,
                 node_labels=rng.integers(0, num_labels, size=n).astype(np.int64),
                 graph_label=label)
