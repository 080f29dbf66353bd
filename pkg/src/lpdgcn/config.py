"""Flat key=value run configuration with file + override layering."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from .data import Dataset, one_hot_features, parse_tu_dataset
from .model import ModelConfig, config_for_variant
from .optim import Hyper
from .synth import generate_synthetic_dataset


@dataclass
class RunConfig:
    data_root: str = "data"
    dataset: str = "SYNTH"
    variant: str = "full"
    layers: int = 5
    hidden: int = 64
    readout_dim: int = 64
    epochs: int = 350
    batch_size: int = 32
    base_lr: float = 0.01
    decay_factor: float = 0.5
    decay_every: int = 20
    dropout: float = 0.5
    lam: float = 0.2
    seed: int = 1
    folds: int = 10
    jobs: int = 1
    out_dir: str = "runs/last"
    dtype: str = "float32"
    reconstruction: str = "onehot"


def _coerce(name: str, value: str, target_type):
    value = value.strip()
    if target_type is bool:
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"config key {name!r}: expected a boolean, got {value!r}")
    try:
        return target_type(value)
    except ValueError:
        raise ValueError(f"config key {name!r}: expected {target_type.__name__}, "
                         f"got {value!r}") from None


def parse_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment; blank lines ignored."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def load_run_config(path: str | None = None, overrides: list | None = None,
                    defaults: RunConfig | None = None) -> RunConfig:
    cfg = defaults if defaults is not None else RunConfig()
    by_name = {f.name: f for f in fields(RunConfig)}
    pairs = []
    if path is not None:
        pairs.extend(parse_config_file(path).items())
    for ov in overrides or []:
        if "=" not in ov:
            raise ValueError(f"override must be key=value, got {ov!r}")
        key, value = ov.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    updates = {}
    for key, value in pairs:
        f = by_name.get(key)
        if f is None:
            raise ValueError(f"unknown config key {key!r}")
        updates[key] = _coerce(key, value, f.type if isinstance(f.type, type)
                               else type(getattr(cfg, key)))
    return dataclasses.replace(cfg, **updates)


def config_lines(cfg: RunConfig) -> list:
    return [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(RunConfig)]


def load_dataset(cfg: RunConfig) -> Dataset:
    """Parse <data_root>/<dataset>/ if present; the reserved name SYNTH
    falls back to the bundled deterministic generator."""
    path = os.path.join(cfg.data_root, cfg.dataset)
    if os.path.isdir(path):
        ds = parse_tu_dataset(cfg.data_root, cfg.dataset)
    elif cfg.dataset.upper() == "SYNTH":
        ds = generate_synthetic_dataset()
    else:
        raise FileNotFoundError(
            f"no dataset directory {path!r}; use dataset=SYNTH for the bundled generator")
    return one_hot_features(ds)


def to_hyper(cfg: RunConfig) -> Hyper:
    return Hyper(base_lr=cfg.base_lr, decay_factor=cfg.decay_factor,
                 decay_every=cfg.decay_every, epochs=cfg.epochs,
                 batch_size=cfg.batch_size, dropout_p=cfg.dropout,
                 lam=cfg.lam, seed=cfg.seed)


def to_model_config(cfg: RunConfig, ds: Dataset) -> ModelConfig:
    base = ModelConfig(num_classes=ds.num_classes,
                       num_node_labels=ds.num_node_labels,
                       layers=cfg.layers, hidden=cfg.hidden,
                       readout_dim=cfg.readout_dim, lam=cfg.lam,
                       dropout_p=cfg.dropout, reconstruction=cfg.reconstruction,
                       dtype=cfg.dtype)
    return config_for_variant(base, cfg.variant)
