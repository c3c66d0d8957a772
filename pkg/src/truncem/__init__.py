"""Probabilistic sparse coding and mixture models trained by truncated-posterior EM."""

from .annealing import AnnealState, Annealing, LinearAnnealing, Schedule
from .core import (
    ConfigError,
    DataError,
    DataSet,
    NumericalError,
    RngStream,
    StateExplosionError,
    log_sum_exp,
    seeded_rng,
)
from .em import EM, Model, TrainResult, run
from .models import BSC, DSC, GMM, GSC, MCA, MMCA, PMM, TSC, make_model
from .parallel import ShardPlan, SuffStats, map_reduce
from .truncation import (
    TruncationConfig,
    enumerate_binary_states,
    enumerate_valued_states,
    select_candidates,
    truncated_expectations,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealState", "Annealing", "LinearAnnealing", "Schedule",
    "ConfigError", "DataError", "DataSet", "NumericalError", "RngStream", "StateExplosionError",
    "log_sum_exp", "seeded_rng",
    "EM", "Model", "TrainResult", "run",
    "BSC", "TSC", "DSC", "GSC", "MCA", "MMCA", "GMM", "PMM", "make_model",
    "ShardPlan", "SuffStats", "map_reduce",
    "TruncationConfig", "enumerate_binary_states", "enumerate_valued_states",
    "select_candidates", "truncated_expectations",
]
