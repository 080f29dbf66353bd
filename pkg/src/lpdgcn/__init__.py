"""Graph classification with densely connected convolutions, per-layer
global context, attention-aggregated readouts, and a node-feature
reconstruction regularizer, on a small reverse-mode autodiff core."""

from .autodiff import (BatchNormState, GradientMap, Tape, Tensor, backward,
                       batch_norm, dropout, neighbor_sum, segment_sum,
                       softmax_cross_entropy)
from .data import (Dataset, FoldPlan, Graph, GraphBatch, TuFormatError,
                   make_batch, one_hot_features, parse_tu_dataset,
                   stratified_folds, write_tu_dataset)
from .gradcheck import finite_difference_check
from .harness import (CVReport, TrainReport, ablate, cross_validate, evaluate,
                      sweep, train_fold)
from .model import (ForwardArtifacts, GinParams, ModelConfig, ModelParams,
                    config_for_variant, forward_pass, gin_forward, init_params,
                    model_forward, named_parameters)
from .nn import MlpParams, make_mlp, mlp_forward
from .optim import AdamState, Hyper, adam_step, lr_at_epoch
from .seeding import derive_seed
from .stats import rank_sum_test
from .synth import fixture_pair, generate_synthetic_dataset

__all__ = [name for name in dir() if not name.startswith("_")]
