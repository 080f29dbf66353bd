"""Graph datasets in the TU plain-text layout, batching, and fold plans.

A dataset directory <root>/<NAME>/ holds four files:

  NAME_A.txt               one "i, j" edge per line, 1-based global node ids
  NAME_graph_indicator.txt line i gives the 1-based graph id of node i
  NAME_graph_labels.txt    one integer class label per graph
  NAME_node_labels.txt     one integer node label per node

Edge lists in the wild repeat each undirected edge in both directions;
parsing collapses them to unordered pairs and make_batch re-expands both
directions. Graph and node labels are remapped to contiguous 0-based codes
in first-appearance order.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .seeding import derive_seed


class TuFormatError(ValueError):
    pass


@dataclass(eq=False)
class Graph:
    node_count: int
    edges: np.ndarray          # (m, 2) int64, unordered pairs stored once, u <= v
    node_labels: np.ndarray    # (n,) int64, 0-based codes
    graph_label: int
    features: np.ndarray | None = None  # (n, d) float64 once one-hot encoded

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])


@dataclass(eq=False)
class Dataset:
    name: str
    graphs: list
    num_classes: int
    num_node_labels: int
    feature_dim: int = 0  # 0 until features are attached

    def __len__(self) -> int:
        return len(self.graphs)

    def class_counts(self) -> np.ndarray:
        counts = np.zeros(self.num_classes, dtype=np.int64)
        for g in self.graphs:
            counts[g.graph_label] += 1
        return counts


def _read_lines(path: str) -> list[str]:
    if not os.path.isfile(path):
        raise TuFormatError(f"missing dataset file: {path}")
    with open(path) as fh:
        return [ln.strip() for ln in fh if ln.strip()]


def _parse_int(token: str, path: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise TuFormatError(f"{path}:{lineno}: expected an integer, got {token!r}") from None


def _remap_first_appearance(raw: list[int]) -> tuple[list[int], int]:
    codes: dict[int, int] = {}
    out = []
    for v in raw:
        if v not in codes:
            codes[v] = len(codes)
        out.append(codes[v])
    return out, len(codes)


def parse_tu_dataset(root: str, name: str) -> Dataset:
    base = os.path.join(root, name)
    paths = {key: os.path.join(base, f"{name}_{key}.txt")
             for key in ("A", "graph_indicator", "graph_labels", "node_labels")}

    indicator_lines = _read_lines(paths["graph_indicator"])
    node_graph = [_parse_int(ln, paths["graph_indicator"], i + 1)
                  for i, ln in enumerate(indicator_lines)]
    n_nodes = len(node_graph)
    graph_ids = sorted(set(node_graph))
    gid_index = {gid: i for i, gid in enumerate(graph_ids)}
    n_graphs = len(graph_ids)

    # global 1-based node id -> (graph index, local 0-based id)
    local_of = np.empty(n_nodes, dtype=np.int64)
    graph_of = np.empty(n_nodes, dtype=np.int64)
    counts = [0] * n_graphs
    for node0, gid in enumerate(node_graph):
        gi = gid_index[gid]
        graph_of[node0] = gi
        local_of[node0] = counts[gi]
        counts[gi] += 1

    label_lines = _read_lines(paths["graph_labels"])
    if len(label_lines) != n_graphs:
        raise TuFormatError(
            f"{paths['graph_labels']}: {len(label_lines)} labels for {n_graphs} graphs")
    raw_glabels = [_parse_int(ln, paths["graph_labels"], i + 1)
                   for i, ln in enumerate(label_lines)]
    glabels, num_classes = _remap_first_appearance(raw_glabels)

    nlabel_lines = _read_lines(paths["node_labels"])
    if len(nlabel_lines) != n_nodes:
        raise TuFormatError(
            f"{paths['node_labels']}: {len(nlabel_lines)} labels for {n_nodes} nodes")
    raw_nlabels = [_parse_int(ln, paths["node_labels"], i + 1)
                   for i, ln in enumerate(nlabel_lines)]
    nlabels, num_node_labels = _remap_first_appearance(raw_nlabels)

    edge_sets: list[set] = [set() for _ in range(n_graphs)]
    for lineno, ln in enumerate(_read_lines(paths["A"]), start=1):
        tokens = [t for t in ln.replace(",", " ").split() if t]
        if len(tokens) != 2:
            raise TuFormatError(f"{paths['A']}:{lineno}: expected 'i, j', got {ln!r}")
        i = _parse_int(tokens[0], paths["A"], lineno)
        j = _parse_int(tokens[1], paths["A"], lineno)
        if not (1 <= i <= n_nodes and 1 <= j <= n_nodes):
            raise TuFormatError(f"{paths['A']}:{lineno}: node id out of range")
        gi, gj = graph_of[i - 1], graph_of[j - 1]
        if gi != gj:
            raise TuFormatError(f"{paths['A']}:{lineno}: edge spans graphs {gi} and {gj}")
        u, v = int(local_of[i - 1]), int(local_of[j - 1])
        edge_sets[gi].add((min(u, v), max(u, v)))

    graphs = []
    per_graph_labels: list[list[int]] = [[] for _ in range(n_graphs)]
    for node0 in range(n_nodes):
        per_graph_labels[graph_of[node0]].append(nlabels[node0])
    for gi in range(n_graphs):
        pairs = sorted(edge_sets[gi])
        edges = np.asarray(pairs, dtype=np.int64).reshape(len(pairs), 2)
        graphs.append(Graph(
            node_count=counts[gi],
            edges=edges,
            node_labels=np.asarray(per_graph_labels[gi], dtype=np.int64),
            graph_label=glabels[gi],
        ))
    return Dataset(name=name, graphs=graphs, num_classes=num_classes,
                   num_node_labels=num_node_labels)


def write_tu_dataset(ds: Dataset, root: str) -> str:
    """Write ds in the same four-file layout (canonical 0-based codes as
    written labels; both directions of each edge; self loops once)."""
    base = os.path.join(root, ds.name)
    os.makedirs(base, exist_ok=True)
    a_lines, ind_lines, gl_lines, nl_lines = [], [], [], []
    offset = 0
    for gi, g in enumerate(ds.graphs):
        for u, v in g.edges:
            a_lines.append(f"{offset + int(u) + 1}, {offset + int(v) + 1}")
            if u != v:
                a_lines.append(f"{offset + int(v) + 1}, {offset + int(u) + 1}")
        ind_lines.extend([str(gi + 1)] * g.node_count)
        gl_lines.append(str(g.graph_label))
        nl_lines.extend(str(int(l)) for l in g.node_labels)
        offset += g.node_count
    for key, lines in (("A", a_lines), ("graph_indicator", ind_lines),
                       ("graph_labels", gl_lines), ("node_labels", nl_lines)):
        with open(os.path.join(base, f"{ds.name}_{key}.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return base


def one_hot_features(ds: Dataset) -> Dataset:
    """Attach one-hot node-label features of width num_node_labels."""
    t = ds.num_node_labels
    eye = np.eye(t, dtype=np.float64)
    graphs = [replace(g, features=eye[g.node_labels]) for g in ds.graphs]
    return Dataset(name=ds.name, graphs=graphs, num_classes=ds.num_classes,
                   num_node_labels=t, feature_dim=t)


@dataclass(eq=False)
class GraphBatch:
    x: np.ndarray              # (n_total, d) stacked node features
    directed_edges: np.ndarray  # (e_total, 2) int64, both directions present
    node_graph_id: np.ndarray  # (n_total,) int64 in [0, num_graphs)
    labels: np.ndarray         # (num_graphs,) int64
    num_graphs: int
    num_nodes: int


def make_batch(graphs: list) -> GraphBatch:
    if not graphs:
        raise ValueError("make_batch: empty graph list")
    widths = {(-1 if g.features is None else g.features.shape[1]) for g in graphs}
    if len(widths) != 1 or -1 in widths:
        raise ValueError("make_batch: graphs must all carry features of one width")
    xs, edges, seg, labels = [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        xs.append(g.features)
        for u, v in g.edges:
            u, v = int(u) + offset, int(v) + offset
            edges.append((u, v))
            if u != v:
                edges.append((v, u))
        seg.append(np.full(g.node_count, gi, dtype=np.int64))
        labels.append(g.graph_label)
        offset += g.node_count
    e = np.asarray(edges, dtype=np.int64).reshape(len(edges), 2)
    return GraphBatch(
        x=np.concatenate(xs, axis=0),
        directed_edges=e,
        node_graph_id=np.concatenate(seg),
        labels=np.asarray(labels, dtype=np.int64),
        num_graphs=len(graphs),
        num_nodes=offset,
    )


@dataclass(eq=False)
class FoldPlan:
    k: int
    seed: int
    folds: list  # k sorted int lists partitioning range(len(ds))


def stratified_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Deal each class round-robin into k folds after a seeded in-class
    shuffle. The deal pointer carries over from class to class, which keeps
    fold sizes within one of each other overall and per class."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > len(ds.graphs):
        raise ValueError(f"{k} folds for {len(ds.graphs)} graphs")
    by_class: dict[int, list[int]] = {}
    for i, g in enumerate(ds.graphs):
        by_class.setdefault(g.graph_label, []).append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    pointer = 0
    for label in sorted(by_class):
        members = by_class[label]
        rng = np.random.default_rng(derive_seed(seed, "fold-shuffle", label))
        order = rng.permutation(len(members))
        for j in order:
            folds[pointer % k].append(members[int(j)])
            pointer += 1
    return FoldPlan(k=k, seed=seed, folds=[sorted(f) for f in folds])
