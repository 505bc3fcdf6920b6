"""Wirtinger flow with interchangeable step-size engines and optional
gradient truncation."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .init_eval import RunState, TraceRow, nrmse as _nrmse, psnr as _psnr
from .numerics import cubic_real_roots, real_dot
from .objectives import GaussianObjective, HuberTV, PoissonObjective
from .operators import FieldTag, SignalVector, project_field


class StepKind(enum.Enum):
    FISHER = "fisher"
    BACKTRACKING = "backtracking"
    EXACT_GAUSSIAN = "exact_gaussian"


@dataclass
class StepRule:
    kind: StepKind = StepKind.FISHER
    # backtracking parameters
    shrink: float = 0.5
    sufficient_decrease: float = 0.01
    initial_step: float = 1.0
    max_trials: int = 30

    def __post_init__(self):
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError("sufficient-decrease constant must lie in (0, 1)")
        if self.initial_step <= 0 or self.max_trials < 1:
            raise ValueError("bad backtracking parameters")


@dataclass
class TruncationRule:
    enabled: bool = False
    a_h: float = 10.0


class DegenerateIterateError(RuntimeError):
    """Raised when a step size is undefined at the current iterate."""


def step_fisher(obj: PoissonObjective, x: NDArray, grad: NDArray) -> float:
    """mu = ||grad||^2 / (d' D1 d), d = A grad, D1 the marginal Fisher diag."""
    gnorm2 = float(np.sum(np.abs(grad) ** 2))
    if gnorm2 == 0.0:
        raise DegenerateIterateError("zero gradient")
    d = obj.model.apply_linear(grad)
    d1 = obj.fisher_diag(obj.model.apply(x))
    denom = float(np.sum(d1 * np.abs(d) ** 2))
    if denom <= 0.0:
        raise DegenerateIterateError("zero Fisher curvature along the gradient")
    return gnorm2 / denom


def step_fisher_reg(
    obj: PoissonObjective, reg: HuberTV, x: NDArray, grad_reg: NDArray
) -> float:
    """Regularized Fisher step with the Huber majorizer weight D2."""
    gnorm2 = float(np.sum(np.abs(grad_reg) ** 2))
    if gnorm2 == 0.0:
        raise DegenerateIterateError("zero gradient")
    d = obj.model.apply_linear(grad_reg)
    d1 = obj.fisher_diag(obj.model.apply(x))
    denom = float(np.sum(d1 * np.abs(d) ** 2))
    if reg.beta > 0:
        td = reg.diff_op.apply(grad_reg)
        d2 = reg.weights(x)
        denom += reg.beta * float(np.sum(d2 * np.abs(td) ** 2))
    if denom <= 0.0:
        raise DegenerateIterateError("zero curvature along the gradient")
    return gnorm2 / denom


def step_backtracking(
    cost_fn, x: NDArray, grad: NDArray, rule: StepRule
) -> tuple[float, bool]:
    """Armijo backtracking: largest mu0 * shrink^j passing sufficient decrease.

    Returns (mu, satisfied); when trials are exhausted, the smallest trial
    step is returned with satisfied=False.
    """
    gnorm2 = real_dot(grad, grad)
    if gnorm2 == 0.0:
        raise DegenerateIterateError("zero gradient")
    f0 = cost_fn(x)
    mu = rule.initial_step
    for _ in range(rule.max_trials):
        if cost_fn(x - mu * grad) <= f0 - rule.sufficient_decrease * mu * gnorm2:
            return mu, True
        mu *= rule.shrink
    return mu / rule.shrink, False


def gaussian_line_coeffs(
    obj: GaussianObjective, x: NDArray, grad: NDArray
) -> tuple[float, float, float, float, float]:
    """Coefficients (a0..a4) of the quartic mu -> g(x - mu*grad)."""
    u = obj.model.apply(x)
    w = obj.model.apply_linear(grad)
    r = obj.y - obj.b - np.abs(u) ** 2
    c = np.real(np.conj(u) * w)
    w2 = np.abs(w) ** 2
    a0 = float(np.sum(r * r))
    a1 = float(4.0 * np.sum(r * c))
    a2 = float(np.sum(4.0 * c * c - 2.0 * r * w2))
    a3 = float(-4.0 * np.sum(c * w2))
    a4 = float(np.sum(w2 * w2))
    return a0, a1, a2, a3, a4


def step_exact_gaussian(obj: GaussianObjective, x: NDArray, grad: NDArray) -> float:
    """Global minimizer over mu >= 0 of the quartic line restriction of g."""
    if np.all(grad == 0):
        raise DegenerateIterateError("zero gradient")
    a0, a1, a2, a3, a4 = gaussian_line_coeffs(obj, x, grad)
    if a1 == a2 == a3 == a4 == 0.0:
        raise DegenerateIterateError("degenerate line restriction")
    crit = cubic_real_roots(4.0 * a4, 3.0 * a3, 2.0 * a2, a1)
    candidates = [0.0] + [m for m in crit if m >= 0.0]

    def line_cost(m):
        return ((a4 * m + a3) * m + a2) * m * m + a1 * m + a0

    best = min(candidates, key=lambda m: (line_cost(m), m))
    return float(best)


def truncation_mask(obj: PoissonObjective, x: NDArray, a_h: float) -> NDArray:
    """Boolean mask of measurements kept by the residual threshold criterion."""
    xnorm = float(np.linalg.norm(x))
    if xnorm == 0.0:
        raise ValueError("truncation undefined at x = 0")
    ax2 = np.abs(obj.model.apply(x)) ** 2
    resid = np.abs(obj.y - ax2)
    level = a_h * (np.sum(resid) / obj.model.rows) * (ax2 / xnorm)
    return resid <= level


def _metrics(x, x_true):
    if x_true is None:
        return float("nan"), float("nan")
    return _nrmse(x, x_true), _psnr(x, x_true)


def run_wf(
    obj: PoissonObjective,
    x0: SignalVector,
    n_iters: int,
    rule: StepRule | None = None,
    reg: HuberTV | None = None,
    trunc: TruncationRule | None = None,
    x_true: NDArray | None = None,
) -> RunState:
    """Wirtinger flow x_{k+1} = x_k - mu_k * grad, with per-iteration trace.

    The trace records cost, phase-corrected NRMSE/PSNR, and cumulative wall
    time of the updates only. Real-nonnegative signals are clamped to the
    nonnegative orthant after each update.
    """
    rule = rule or StepRule()
    trunc = trunc or TruncationRule()
    field = x0.field
    x = x0.values.copy()
    state = RunState(x=x)
    beta = reg.beta if reg is not None else 0.0

    def total_cost(z):
        c = obj.cost(z)
        if reg is not None:
            c += beta * reg.value(z)
        return c

    elapsed = 0.0
    for k in range(1, n_iters + 1):
        t0 = time.perf_counter()
        try:
            if trunc.enabled:
                mg = obj.marginal_grad(obj.model.apply(x))
                mg = np.where(truncation_mask(obj, x, trunc.a_h), mg, 0.0)
                grad = obj._fieldify(obj.model.adjoint(mg))
            else:
                grad = obj.gradient(x)
            if reg is not None:
                grad = obj._fieldify(grad + reg.gradient(x))

            if rule.kind is StepKind.FISHER:
                if reg is not None:
                    mu = step_fisher_reg(obj, reg, x, grad)
                else:
                    mu = step_fisher(obj, x, grad)
            elif rule.kind is StepKind.BACKTRACKING:
                mu, ok = step_backtracking(total_cost, x, grad, rule)
                if not ok:
                    state.warnings.append(f"iter {k}: backtracking exhausted trials")
            elif rule.kind is StepKind.EXACT_GAUSSIAN:
                if not isinstance(obj, GaussianObjective):
                    raise TypeError("exact Gaussian line search needs a Gaussian cost")
                mu = step_exact_gaussian(obj, x, grad)
            else:  # pragma: no cover
                raise ValueError(f"unknown step rule {rule.kind}")

            x_new = project_field(x - mu * grad, field)
            if rule.kind is StepKind.FISHER:
                # rare early-iteration overshoot safeguard: halve once
                c_old = total_cost(x)
                c_new = total_cost(x_new)
                if c_new > c_old + 10.0 * abs(c_old):
                    mu *= 0.5
                    x_new = project_field(x - mu * grad, field)
                    state.warnings.append(f"iter {k}: Fisher step halved once")
            x = x_new
        except DegenerateIterateError as exc:
            state.status = f"terminated: {exc}"
            break
        elapsed += time.perf_counter() - t0
        nr, ps = _metrics(x, x_true)
        state.trace.append(TraceRow(k, elapsed, total_cost(x), nr, ps))
    state.x = x
    return state
