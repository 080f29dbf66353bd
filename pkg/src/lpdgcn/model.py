"""Graph classifier with dense conv connections, per-layer global context,
attention-weighted readout aggregation, and an optional node-feature
reconstruction loss. A plain sum-aggregation baseline ("gin") shares the
batch/loss plumbing.

Layer scheme (K conv layers, layer 1 consumes raw features):

  a_v(k) = sum over neighbors u of [ sum_{i<k} h_u(i) ]        (dense)
  h_v(k) = MLP_k([a_v(k) || eps_k * hG(k-1) broadcast])        (context)
  hG(k)  = MLP'_k(sum over v of sum_{i<=k} h_v(i), per graph)  (readout)
  hG*    = ReLU(sum_k alpha_k * (hG(k) W1)),  alpha = softmax over layers
  x_hat  = Dec([sum_i h_v(i) || hG(K) broadcast])              (reconstruction)

Ablation flags drop each ingredient: use_dc folds the cumulative sums back
to the latest layer, use_gca removes the context concat, use_lfr removes
the decoder and its loss term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import (GradientMap, Tensor, add, concat_features, dropout,
                       gather_rows, linear, matmul, mul_colvec, mul_scalar,
                       neighbor_sum, relu, row_sum, scale, segment_sum,
                       slice_cols, softmax_cross_entropy, softmax_rows,
                       softplus, sqrt_scalar, subtract, sum_all, multiply)
from .data import GraphBatch
from .nn import MlpParams, glorot_uniform, make_mlp, mlp_forward, \
    mlp_named_params, mlp_named_state
from .seeding import derive_seed

# raw value whose softplus is exactly 1
EPS_RAW_INIT = math.log(math.e - 1.0)

VARIANTS = ("full", "nolfr", "nodc", "nogca", "gin")


@dataclass
class ModelConfig:
    num_classes: int
    num_node_labels: int
    layers: int = 5          # K, counting the input conv layer
    hidden: int = 64         # d_h
    readout_dim: int = 64    # d_o
    use_lfr: bool = True
    use_dc: bool = True
    use_gca: bool = True
    lam: float = 0.2
    dropout_p: float = 0.5
    reconstruction: str = "onehot"
    dtype: str = "float32"
    arch: str = "lpdgcn"

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("layers must be >= 2")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_node_labels < 1:
            raise ValueError("num_node_labels must be >= 1")
        if not (0 <= self.dropout_p < 1):
            raise ValueError("dropout_p must be in [0, 1)")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.reconstruction not in ("onehot", "continuous"):
            raise ValueError(f"unknown reconstruction kind {self.reconstruction!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.arch not in ("lpdgcn", "gin"):
            raise ValueError(f"unknown arch {self.arch!r}")


def config_for_variant(base: ModelConfig, variant: str) -> ModelConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if variant == "full":
        return replace(base, arch="lpdgcn", use_lfr=True, use_dc=True, use_gca=True)
    if variant == "nolfr":
        return replace(base, arch="lpdgcn", use_lfr=False, use_dc=True, use_gca=True)
    if variant == "nodc":
        return replace(base, arch="lpdgcn", use_lfr=True, use_dc=False, use_gca=True)
    if variant == "nogca":
        return replace(base, arch="lpdgcn", use_lfr=True, use_dc=True, use_gca=False)
    return replace(base, arch="gin")


@dataclass(eq=False)
class ModelParams:
    conv: list            # K MlpParams, each with batch norm
    readout: list         # K MlpParams, no batch norm
    eps_raw: list         # K-1 scalar Tensors (layers 2..K) when use_gca, else []
    attn_w1: Tensor
    attn_w2: Tensor
    decoder: MlpParams | None
    cls_w: Tensor
    cls_b: Tensor


@dataclass(eq=False)
class GinParams:
    mlps: list            # K MlpParams with batch norm
    eps: list             # K scalar Tensors, init 0, unconstrained
    cls_w: Tensor
    cls_b: Tensor


def init_params(config: ModelConfig, seed: int):
    """Build parameters from (config, seed) only. Each named group draws
    from its own derived rng, so adding or removing a group (ablations)
    leaves every other group's values untouched."""
    dt = np.dtype(config.dtype)
    d_i, d_h, d_o = config.num_node_labels, config.hidden, config.readout_dim
    k_layers = config.layers

    if config.arch == "gin":
        mlps = []
        for k in range(1, k_layers + 1):
            ins = d_i if k == 1 else d_h
            mlps.append(make_mlp(derive_seed(seed, "init", f"gin.{k}"),
                                 ins, d_h, d_h, with_bn=True, dtype=dt))
        eps = [Tensor(np.asarray(0.0, dtype=dt), requires_grad=True)
               for _ in range(k_layers)]
        rng = np.random.default_rng(derive_seed(seed, "init", "gin.cls"))
        cat_dim = d_i + k_layers * d_h
        return GinParams(
            mlps=mlps, eps=eps,
            cls_w=Tensor(glorot_uniform(rng, cat_dim, config.num_classes, dt),
                         requires_grad=True),
            cls_b=Tensor(np.zeros(config.num_classes, dtype=dt), requires_grad=True),
        )

    conv = []
    for k in range(1, k_layers + 1):
        if k == 1:
            ins, hid = d_i, d_h
        elif config.use_gca:
            ins = hid = d_h + d_o  # context concat widens input and hidden
        else:
            ins, hid = d_h, d_h
        conv.append(make_mlp(derive_seed(seed, "init", f"conv.{k}"),
                             ins, hid, d_h, with_bn=True, dtype=dt))
    readout = [make_mlp(derive_seed(seed, "init", f"readout.{k}"),
                        d_h, d_h, d_o, with_bn=False, dtype=dt)
               for k in range(1, k_layers + 1)]
    eps_raw = []
    if config.use_gca:
        eps_raw = [Tensor(np.asarray(EPS_RAW_INIT, dtype=dt), requires_grad=True)
                   for _ in range(2, k_layers + 1)]
    rng = np.random.default_rng(derive_seed(seed, "init", "attn"))
    attn_w1 = Tensor(glorot_uniform(rng, d_o, d_o, dt), requires_grad=True)
    attn_w2 = Tensor(glorot_uniform(rng, d_o, d_o, dt), requires_grad=True)
    decoder = None
    if config.use_lfr:
        decoder = make_mlp(derive_seed(seed, "init", "decoder"),
                           d_h + d_o, d_h, d_i, with_bn=False, dtype=dt)
    rng = np.random.default_rng(derive_seed(seed, "init", "cls"))
    return ModelParams(
        conv=conv, readout=readout, eps_raw=eps_raw,
        attn_w1=attn_w1, attn_w2=attn_w2, decoder=decoder,
        cls_w=Tensor(glorot_uniform(rng, d_o, config.num_classes, dt),
                     requires_grad=True),
        cls_b=Tensor(np.zeros(config.num_classes, dtype=dt), requires_grad=True),
    )


def named_parameters(params) -> list:
    out = []
    if isinstance(params, GinParams):
        for k, mlp in enumerate(params.mlps, start=1):
            out += mlp_named_params(f"gin.{k}", mlp)
        for k, e in enumerate(params.eps, start=1):
            out.append((f"gin.eps.{k}", e))
        out += [("gin.cls.w", params.cls_w), ("gin.cls.b", params.cls_b)]
        return out
    for k, mlp in enumerate(params.conv, start=1):
        out += mlp_named_params(f"conv.{k}", mlp)
    for k, mlp in enumerate(params.readout, start=1):
        out += mlp_named_params(f"readout.{k}", mlp)
    for k, e in enumerate(params.eps_raw, start=2):
        out.append((f"eps_raw.{k}", e))
    out += [("attn.w1", params.attn_w1), ("attn.w2", params.attn_w2)]
    if params.decoder is not None:
        out += mlp_named_params("decoder", params.decoder)
    out += [("cls.w", params.cls_w), ("cls.b", params.cls_b)]
    return out


def named_state(params) -> list:
    out = []
    if isinstance(params, GinParams):
        for k, mlp in enumerate(params.mlps, start=1):
            out += mlp_named_state(f"gin.{k}", mlp)
        return out
    for k, mlp in enumerate(params.conv, start=1):
        out += mlp_named_state(f"conv.{k}", mlp)
    for k, mlp in enumerate(params.readout, start=1):
        out += mlp_named_state(f"readout.{k}", mlp)
    if params.decoder is not None:
        out += mlp_named_state("decoder", params.decoder)
    return out


@dataclass(eq=False)
class ForwardArtifacts:
    node_embeddings: list        # h[0..K]
    aggregates: list             # neighbor sums per layer
    readouts: list               # hG(1..K)
    alpha: Tensor | None         # (num_graphs, K) attention weights
    graph_repr: Tensor | None    # attention-aggregated graph vector
    class_logits: Tensor
    recon: Tensor | None
    loss_gc: Tensor | None
    loss_lfr: Tensor | None
    loss: Tensor | None


# ---------------------------------------------------------------------------
# building blocks


def conv_layer(k: int, h: list, hg_prev: Tensor | None, batch: GraphBatch,
               params: ModelParams, config: ModelConfig, mode: str = "eval",
               rng=None) -> tuple:
    """Returns (h_k, aggregate). h holds h[0..k-1]."""
    if not (1 <= k <= config.layers):
        raise ValueError(f"layer index {k} outside 1..{config.layers}")
    if k == 1:
        src = h[0]
    elif config.use_dc:
        src = h[1]
        for i in range(2, k):
            src = add(src, h[i])
    else:
        src = h[k - 1]
    agg = neighbor_sum(src, batch.directed_edges)
    if config.use_gca and k >= 2:
        if hg_prev is None:
            raise ValueError("conv_layer: k >= 2 with global context needs hg_prev")
        ctx = mul_scalar(hg_prev, softplus(params.eps_raw[k - 2]))
        z = concat_features(agg, gather_rows(ctx, batch.node_graph_id))
    else:
        z = agg
    out = mlp_forward(params.conv[k - 1], z, mode)
    if mode == "train" and config.dropout_p > 0:
        out = dropout(out, config.dropout_p, mode, rng)
    return out, agg


def readout_layer(k: int, h: list, batch: GraphBatch, params: ModelParams,
                  config: ModelConfig, mode: str = "eval") -> Tensor:
    """Graph vector hG(k) from node states h[1..k]."""
    if config.use_dc:
        src = h[1]
        for i in range(2, k + 1):
            src = add(src, h[i])
    else:
        src = h[k]
    pooled = segment_sum(src, batch.node_graph_id, batch.num_graphs)
    return mlp_forward(params.readout[k - 1], pooled, mode)


def attention_aggregate(readouts: list, w1: Tensor, w2: Tensor) -> tuple:
    """Softmax-weighted combination of per-layer graph vectors.

    Scores are the row sums of ReLU(hG W1) W2; weights are per-graph
    softmax over the layer axis. Returns (graph_repr, alpha)."""
    if not readouts:
        raise ValueError("attention_aggregate: no readouts")
    projected = [matmul(hg, w1) for hg in readouts]
    scores = [row_sum(matmul(relu(p), w2)) for p in projected]
    stacked = scores[0]
    for s in scores[1:]:
        stacked = concat_features(stacked, s)
    alpha = softmax_rows(stacked)
    combined = mul_colvec(projected[0], slice_cols(alpha, 0, 1))
    for k in range(1, len(projected)):
        combined = add(combined, mul_colvec(projected[k], slice_cols(alpha, k, k + 1)))
    return relu(combined), alpha


def decode_node_features(node_sum: Tensor, hg_last: Tensor, batch: GraphBatch,
                         decoder: MlpParams | None, mode: str = "eval") -> Tensor:
    if decoder is None:
        raise ValueError("decode_node_features: model has no decoder")
    ctx = gather_rows(hg_last, batch.node_graph_id)
    return mlp_forward(decoder, concat_features(node_sum, ctx), mode)


def classification_loss(class_logits: Tensor, labels) -> Tensor:
    """Summed cross entropy over the batch (no averaging)."""
    return softmax_cross_entropy(class_logits, labels)


def reconstruction_loss(recon: Tensor, x: np.ndarray, kind: str,
                        num_graphs: int | None = None) -> Tensor:
    if kind == "onehot":
        if not np.all((x == 0) | (x == 1)) or not np.allclose(x.sum(axis=1), 1.0):
            raise ValueError("onehot reconstruction needs one-hot feature rows")
        return softmax_cross_entropy(recon, np.argmax(x, axis=1))
    if kind == "continuous":
        if num_graphs is None or num_graphs < 1:
            raise ValueError("continuous reconstruction needs the graph count")
        diff = subtract(recon, Tensor(np.asarray(x, dtype=recon.values.dtype)))
        return sqrt_scalar(scale(sum_all(multiply(diff, diff)), 1.0 / num_graphs))
    raise ValueError(f"unknown reconstruction kind {kind!r}")


def total_loss(loss_gc: Tensor, loss_lfr: Tensor | None, lam: float) -> Tensor:
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if loss_lfr is None or lam == 0:
        return loss_gc
    return add(loss_gc, scale(loss_lfr, lam))


# ---------------------------------------------------------------------------
# full passes


def model_forward(batch: GraphBatch, params: ModelParams, config: ModelConfig,
                  mode: str = "eval", rng=None) -> ForwardArtifacts:
    if batch.x.shape[1] != config.num_node_labels:
        raise ValueError(f"feature width {batch.x.shape[1]} does not match "
                         f"config num_node_labels {config.num_node_labels}")
    dt = np.dtype(config.dtype)
    h = [Tensor(batch.x.astype(dt))]
    aggs, readouts = [], []
    node_sum = None
    for k in range(1, config.layers + 1):
        hg_prev = readouts[k - 2] if k >= 2 else None
        hk, agg = conv_layer(k, h, hg_prev, batch, params, config, mode, rng)
        h.append(hk)
        aggs.append(agg)
        node_sum = hk if node_sum is None else add(node_sum, hk)
        readouts.append(readout_layer(k, h, batch, params, config, mode))
    graph_repr, alpha = attention_aggregate(readouts, params.attn_w1, params.attn_w2)
    rep = graph_repr
    if mode == "train" and config.dropout_p > 0:
        rep = dropout(rep, config.dropout_p, mode, rng)
    class_logits = linear(rep, params.cls_w, params.cls_b)
    loss_gc = classification_loss(class_logits, batch.labels)
    recon = loss_lfr = None
    if config.use_lfr and config.lam > 0:
        recon = decode_node_features(node_sum, readouts[-1], batch, params.decoder, mode)
        loss_lfr = reconstruction_loss(recon, batch.x.astype(dt), config.reconstruction,
                                       batch.num_graphs)
    loss = total_loss(loss_gc, loss_lfr, config.lam)
    return ForwardArtifacts(node_embeddings=h, aggregates=aggs, readouts=readouts,
                            alpha=alpha, graph_repr=graph_repr,
                            class_logits=class_logits, recon=recon,
                            loss_gc=loss_gc, loss_lfr=loss_lfr, loss=loss)


def gin_forward(batch: GraphBatch, params: GinParams, config: ModelConfig,
                mode: str = "eval", rng=None) -> Tensor:
    """Sum-aggregation baseline: h_k = MLP_k((1 + eps_k) h_{k-1} + sum of
    neighbor h_{k-1}); readout concatenates per-graph sums of h_0..h_K."""
    if batch.x.shape[1] != config.num_node_labels:
        raise ValueError(f"feature width {batch.x.shape[1]} does not match "
                         f"config num_node_labels {config.num_node_labels}")
    dt = np.dtype(config.dtype)
    h = Tensor(batch.x.astype(dt))
    pooled = segment_sum(h, batch.node_graph_id, batch.num_graphs)
    for k in range(1, config.layers + 1):
        agg = neighbor_sum(h, batch.directed_edges)
        z = add(add(h, mul_scalar(h, params.eps[k - 1])), agg)
        h = mlp_forward(params.mlps[k - 1], z, mode)
        if mode == "train" and config.dropout_p > 0:
            h = dropout(h, config.dropout_p, mode, rng)
        pooled = concat_features(pooled, segment_sum(h, batch.node_graph_id,
                                                     batch.num_graphs))
    if mode == "train" and config.dropout_p > 0:
        pooled = dropout(pooled, config.dropout_p, mode, rng)
    return linear(pooled, params.cls_w, params.cls_b)


def forward_pass(batch: GraphBatch, params, config: ModelConfig,
                 mode: str = "eval", rng=None) -> ForwardArtifacts:
    """Uniform entry point for both architectures."""
    if config.arch == "gin":
        logits = gin_forward(batch, params, config, mode, rng)
        loss_gc = classification_loss(logits, batch.labels)
        return ForwardArtifacts(node_embeddings=[], aggregates=[], readouts=[],
                                alpha=None, graph_repr=None, class_logits=logits,
                                recon=None, loss_gc=loss_gc, loss_lfr=None,
                                loss=loss_gc)
    return model_forward(batch, params, config, mode, rng)
