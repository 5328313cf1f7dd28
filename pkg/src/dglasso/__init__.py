"""Sparse joint estimation of the transition and state-noise precision
matrices of a linear-Gaussian state-space model.

Typical use::

    from dglasso import make_dataset, fit, SolverConfig, evaluate

    gt, train, test = make_dataset("A", seed=0)
    obs = gt.spec.observation_model()
    res = fit(train, obs, SolverConfig(lambda_A=10.0, lambda_P=10.0))
    report = evaluate(gt, res, obs, test)
"""

from ._backend import BACKEND, available_backends
from .datagen import DatasetSpec, GroundTruth, make_dataset
from .errors import (
    DegenerateClass,
    DegeneratePVector,
    DGlassoError,
    DimensionMismatch,
    DivergenceDetected,
    MaxIterExceeded,
    NonSPD,
    NoProgress,
    SingularSylvester,
    SymmetryViolation,
    ZeroReference,
)
from .inner import InnerConfig, InnerResult, solve_A_update, solve_P_update
from .lgssm import (
    ModelParams,
    ObservationModel,
    SmoothingStats,
    TimeSeries,
    kalman_filter,
    marginal_negloglik,
    rts_smoother,
    smoothing_stats,
)
from .metrics import EdgeScores, MetricsReport, cnmse, edge_scores, evaluate, rmse
from .solver import FitResult, Mode, SolverConfig, evaluate_loss, evaluate_majorizer, fit

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "available_backends",
    "DatasetSpec",
    "GroundTruth",
    "make_dataset",
    "DGlassoError",
    "DegenerateClass",
    "DegeneratePVector",
    "DimensionMismatch",
    "DivergenceDetected",
    "MaxIterExceeded",
    "NonSPD",
    "NoProgress",
    "SingularSylvester",
    "SymmetryViolation",
    "ZeroReference",
    "InnerConfig",
    "InnerResult",
    "solve_A_update",
    "solve_P_update",
    "ModelParams",
    "ObservationModel",
    "SmoothingStats",
    "TimeSeries",
    "kalman_filter",
    "marginal_negloglik",
    "rts_smoother",
    "smoothing_stats",
    "EdgeScores",
    "MetricsReport",
    "cnmse",
    "edge_scores",
    "evaluate",
    "rmse",
    "FitResult",
    "Mode",
    "SolverConfig",
    "evaluate_loss",
    "evaluate_majorizer",
    "fit",
]
