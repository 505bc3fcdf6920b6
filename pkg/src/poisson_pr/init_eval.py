"""Spectral initialization, scale fitting, phase correction, and metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.typing import NDArray

from .numerics import power_method
from .operators import FieldTag, ForwardModel, SignalVector

PSNR_CAP_DB = 300.0


@dataclass
class TraceRow:
    k: int
    time_s: float
    cost: float
    nrmse: float
    psnr: float


@dataclass
class RunState:
    """Final iterate plus the per-iteration trace of a solver run."""

    x: NDArray
    trace: list[TraceRow] = dc_field(default_factory=list)
    status: str = "ok"
    warnings: list[str] = dc_field(default_factory=list)

    def costs(self) -> NDArray:
        return np.array([r.cost for r in self.trace])

    def nrmses(self) -> NDArray:
        return np.array([r.nrmse for r in self.trace])


def spectral_init(
    model: ForwardModel, y: NDArray, iters: int = 300, seed: int = 0
) -> tuple[NDArray, list[str]]:
    """Unit-norm leading eigenvector of A' diag{y / (y+1)} A via power method."""
    y = np.asarray(y, dtype=float)
    warns: list[str] = []
    if np.all(y == 0):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(model.cols) + 1j * rng.standard_normal(model.cols)
        warns.append("all-zero measurements: spectral operator is zero, "
                     "returning a random unit vector")
        return v / np.linalg.norm(v), warns
    w = y / (y + 1.0)

    def op(x):
        return model.adjoint(w * model.apply_linear(x))

    _, v = power_method(op, model.cols, iters=iters, seed=seed)
    return v, warns


def scale_fit(model: ForwardModel, y: NDArray, x0: NDArray) -> tuple[float, list[str]]:
    """Nonlinear LS fit of the initializer scale.

    Closed form sqrt((y - b)' |Ax0|^2) / ||Ax0||_4^2; clipped to 0 with a
    warning when the weighted residual sum is negative.
    """
    ax = model.apply(np.asarray(x0, complex))
    a2 = np.abs(ax) ** 2
    denom = float(np.sum(a2**2))
    if denom == 0.0:
        raise ValueError("scale_fit: A x0 = 0")
    num = float(np.dot(np.asarray(y, float) - model.background, a2))
    if num < 0:
        return 0.0, ["scale_fit: negative LS numerator, returning 0"]
    return float(np.sqrt(num) / np.sqrt(denom)), []


def finalize_init(x0: NDArray, alpha: float, field: FieldTag) -> NDArray:
    """alpha*x0, elementwise-absolute for real-nonnegative signals."""
    scaled = alpha * np.asarray(x0, complex)
    if field is FieldTag.REAL_NONNEGATIVE:
        return np.abs(scaled).astype(complex)
    if field is FieldTag.REAL:
        return scaled.real.astype(complex)
    return scaled


def initialize(
    model: ForwardModel,
    y: NDArray,
    field: FieldTag = FieldTag.COMPLEX,
    iters: int = 300,
    seed: int = 0,
) -> SignalVector:
    """Spectral init + scale fit + field finalization."""
    v, warns = spectral_init(model, y, iters=iters, seed=seed)
    alpha, more = scale_fit(model, y, v)
    for msg in warns + more:
        warnings.warn(msg)
    return SignalVector(finalize_init(v, alpha, field), field=field)


def phase_correct(x_hat: NDArray, x_true: NDArray) -> NDArray:
    """Remove the global phase: sign(<x_hat, x_true>) x_hat, sign(0) := 1."""
    ip = np.vdot(x_hat, x_true)
    s = ip / abs(ip) if abs(ip) > 0 else 1.0
    return s * np.asarray(x_hat, complex)


def nrmse(x_hat: NDArray, x_true: NDArray) -> float:
    """Phase-corrected ||x_hat - x_true|| / ||x_true||."""
    xc = phase_correct(x_hat, x_true)
    return float(np.linalg.norm(xc - x_true) / np.linalg.norm(x_true))


def psnr(x_hat: NDArray, x_true: NDArray, peak: float | None = None) -> float:
    """Phase-corrected PSNR in dB, capped at 300 for exact recovery."""
    if peak is None:
        peak = float(np.max(np.abs(x_true)))
    xc = phase_correct(x_hat, x_true)
    err2 = float(np.sum(np.abs(xc - x_true) ** 2))
    if err2 == 0.0:
        return PSNR_CAP_DB
    val = 10.0 * np.log10(peak**2 * x_true.size / err2)
    return float(min(val, PSNR_CAP_DB))
