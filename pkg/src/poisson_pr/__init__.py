"""Poisson phase retrieval: ML solvers for low-count intensity measurements."""

__version__ = "0.1.0"

from .operators import (
    FieldTag,
    SignalVector,
    ForwardModel,
    DenseModel,
    CanonicalDftModel,
    MaskedDftModel,
    MeasurementSet,
    calibrate_scale,
    simulate_poisson,
)
from .objectives import (
    PoissonObjective,
    GaussianObjective,
    HuberTV,
    DiffOp,
)
from .wf import StepRule, StepKind, TruncationRule, run_wf
from .mm import CurvatureKind, run_mm
from .admm import run_admm
from .baselines import run_lbfgs
from .init_eval import initialize, phase_correct, nrmse, psnr, RunState

__all__ = [
    "FieldTag", "SignalVector", "ForwardModel", "DenseModel",
    "CanonicalDftModel", "MaskedDftModel", "MeasurementSet",
    "calibrate_scale", "simulate_poisson",
    "PoissonObjective", "GaussianObjective", "HuberTV", "DiffOp",
    "StepRule", "StepKind", "TruncationRule", "run_wf",
    "CurvatureKind", "run_mm", "run_admm", "run_lbfgs",
    "initialize", "phase_correct", "nrmse", "psnr", "RunState",
]
