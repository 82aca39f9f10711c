"""Robust regression training from low-cost opinion scores.

Learns quality predictors from cheap, few-annotator labels by treating them
as noisy observations of the abundant-annotator label, estimating each
sample's latent bias with a gated EM-style update, and regressing on the
bias-calibrated targets. Ships the label simulators, screening and
robust-loss baselines, rank metrics, and risk checks needed to evaluate the
approach end to end.
"""

from .backend import active_backend
from .calibration import (
    BiasState,
    BiasTable,
    EmParams,
    GdbcConfig,
    calibrated_target,
    gated_update,
    posterior_mean,
    posterior_variance,
    q_objective,
    update_batch,
)
from .labels import (
    AnnotationPool,
    LabelSet,
    SimConfig,
    count_noisy,
    load_ratings_csv,
    mix_bias_rate,
    sample_labels,
    sample_lc_mos_empirical,
    sample_lc_mos_gaussian,
    sample_lc_mos_raw,
    simulate_labels,
)
from .metrics import delta_percent, krcc, mse, plcc, srcc
from .predictor import Architecture, backward, forward, init_params, parse_architecture, predict
from .trainer import TrainerState, TrainingDiverged, gdbc_train_step, make_trainer_state, train_run

__version__ = "0.1.0"

__all__ = [
    "AnnotationPool",
    "Architecture",
    "BiasState",
    "BiasTable",
    "EmParams",
    "GdbcConfig",
    "LabelSet",
    "SimConfig",
    "TrainerState",
    "TrainingDiverged",
    "active_backend",
    "backward",
    "calibrated_target",
    "count_noisy",
    "delta_percent",
    "forward",
    "gated_update",
    "gdbc_train_step",
    "init_params",
    "krcc",
    "load_ratings_csv",
    "make_trainer_state",
    "mix_bias_rate",
    "mse",
    "parse_architecture",
    "plcc",
    "posterior_mean",
    "posterior_variance",
    "predict",
    "q_objective",
    "sample_labels",
    "sample_lc_mos_empirical",
    "sample_lc_mos_gaussian",
    "sample_lc_mos_raw",
    "simulate_labels",
    "srcc",
    "train_run",
    "update_batch",
]
