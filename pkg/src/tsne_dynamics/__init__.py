"""Exact two-stage t-SNE (early exaggeration, then embedding) with the linear
surrogates and diagnostics used to study its dynamics."""

from ._backend import BACKEND
from .affinity import Bandwidths, joint_affinities, q_matrix, s_matrix
from .datagen import LabeledData, gmm_preset, spheres_preset
from .diagnostics import build_report, separation_ratio, surrogate_deviation
from .engine import EmbeddingState, Stage, TrajectoryLog, TuningParams, run
from .errors import DivergenceError, NumericalError
from .spectral import ComponentLabels, laplacian
from .theory import early_stop_schedule, null_space_limit, power_surrogate, theory_tuning

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Bandwidths", "joint_affinities", "q_matrix", "s_matrix",
    "LabeledData", "gmm_preset", "spheres_preset",
    "build_report", "separation_ratio", "surrogate_deviation",
    "EmbeddingState", "Stage", "TrajectoryLog", "TuningParams", "run",
    "DivergenceError", "NumericalError", "ComponentLabels", "laplacian",
    "early_stop_schedule", "null_space_limit", "power_surrogate", "theory_tuning",
]
