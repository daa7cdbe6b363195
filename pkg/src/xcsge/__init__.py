"""Soft gating ensembles combining global, local and leadtime-dependent
member weights for multi-leadtime forecasts."""

from .data import (
    Dataset,
    LeadtimeFrame,
    Schema,
    SplitPlan,
    SynthConfig,
    kfold_splits,
    lag_features,
    load_csv,
    standardize,
    synth_random_walk_dataset,
    synth_regime_dataset,
)
from .ensemble import (
    EnsembleConfig,
    EtaTriple,
    LaggedMember,
    XcsgeModel,
    expand_time_lagged,
    fit,
    load_model,
    save_model,
    set_member_mask,
)
from .errors import ConfigError, NumericError, XcsgeError
from .kernels import BACKEND
from .learners import fit_member, knn_fit, load_precomputed, ridge_fit
from .metrics import MetricReport, log_loss, macro_f1, r2, rmse, skill_score
from .softgate import soft_gate, soft_gate_raw
from .stats import friedman_test, nemenyi_critical_difference, nemenyi_test, rank_models
from .weighting import LocalModelSpec

__version__ = "0.1.0"
