"""ADMM for the Poisson ML problem with the v = Ax splitting: closed-form
phase/magnitude updates, a least-squares x update, dual ascent, and an
adaptive penalty heuristic."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .init_eval import RunState, TraceRow
from .mm import minimize_quad_plus_huber
from .numerics import cg_solve, power_method, soft_threshold
from .objectives import HuberTV, PoissonObjective
from .operators import FieldTag, ForwardModel, SignalVector, project_field
from .wf import _metrics


def complex_sign(z: NDArray) -> NDArray:
    """z / |z| with sign(0) := 1."""
    az = np.abs(z)
    return np.where(az > 0, z / np.where(az > 0, az, 1.0), 1.0 + 0.0j)


def update_v_phase(ax: NDArray, eta: NDArray) -> NDArray:
    """Phase of the split variable: sign(A x - eta)."""
    return complex_sign(ax - eta)


def update_v_magnitude_b0(t, y, rho: float):
    """Zero-background magnitude update: positive root of the quadratic."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    out = (rho * t + np.sqrt(rho**2 * t**2 + 8.0 * y * (2.0 + rho))) / (2.0 * (2.0 + rho))
    return out if out.ndim else float(out)


def _lagrangian_term(m, y, b, rho, t):
    rate = m * m + b
    return rate - y * np.log(np.where(rate > 0, rate, 1.0)) + 0.5 * rho * (m - t) ** 2


def _cubic_roots_vectorized(t, y, b, rho):
    """Real roots of (2+rho) m^3 - rho t m^2 + (2b - 2y + rho b) m - rho b t.

    Returns an (n, 3) array with NaN padding; trig form where three real
    roots exist, Cardano otherwise, then two Newton polish sweeps.
    """
    a3 = 2.0 + rho
    a2 = -rho * t
    a1 = 2.0 * b - 2.0 * y + rho * b
    a0 = -rho * b * t
    shift = a2 / (3.0 * a3)
    p = (3.0 * a3 * a1 - a2 * a2) / (3.0 * a3 * a3)
    q = (2.0 * a2**3 - 9.0 * a3 * a2 * a1 + 27.0 * a3 * a3 * a0) / (27.0 * a3**3)
    disc = -4.0 * p**3 - 27.0 * q * q

    n = t.shape[0]
    roots = np.full((n, 3), np.nan)
    three = disc > 0
    if np.any(three):
        pm = p[three]
        m = 2.0 * np.sqrt(-pm / 3.0)
        theta = np.arccos(np.clip(3.0 * q[three] / (pm * m), -1.0, 1.0)) / 3.0
        for k in range(3):
            roots[three, k] = m * np.cos(theta - 2.0 * np.pi * k / 3.0)
    one = ~three
    if np.any(one):
        hq = q[one] / 2.0
        s = np.sqrt(np.maximum(hq * hq + p[one] ** 3 / 27.0, 0.0))
        roots[one, 0] = np.cbrt(-hq + s) + np.cbrt(-hq - s)
    roots -= shift[:, None]

    # Newton polish on the original cubic
    for _ in range(2):
        f = ((a3 * roots + a2[:, None]) * roots + a1[:, None]) * roots + a0[:, None]
        df = (3.0 * a3 * roots + 2.0 * a2[:, None]) * roots + a1[:, None]
        step = np.divide(f, df, out=np.zeros_like(f), where=np.abs(df) > 0)
        roots = roots - step
    return roots


def update_v_magnitude_bpos(t, y, b, rho: float):
    """Positive-background magnitude update: the positive cubic root that
    minimizes the marginal augmented Lagrangian."""
    t = np.atleast_1d(np.asarray(t, float))
    y = np.broadcast_to(np.asarray(y, float), t.shape)
    b = np.broadcast_to(np.asarray(b, float), t.shape)
    if np.any(b <= 0):
        raise ValueError("update_v_magnitude_bpos requires b > 0")
    roots = _cubic_roots_vectorized(t, y, b, rho)
    positive = np.isfinite(roots) & (roots > 0)
    if not np.all(np.any(positive, axis=1)):
        raise RuntimeError("cubic magnitude update found no positive root")
    lag = _lagrangian_term(
        np.where(positive, roots, 1.0), y[:, None], b[:, None], rho, t[:, None]
    )
    lag = np.where(positive, lag, np.inf)
    pick = np.argmin(lag, axis=1)
    out = roots[np.arange(t.shape[0]), pick]
    return out if out.shape[0] > 1 else float(out[0])


def update_dual(eta: NDArray, v: NDArray, ax: NDArray) -> NDArray:
    """eta <- eta + (v - A x)."""
    return eta + (v - ax)


def update_rho(rho: float, primal_res_norm: float, dual_res_norm: float, k: int) -> float:
    """Adaptive penalty: every 10th iteration, double/halve on residual imbalance."""
    if k % 10 != 0:
        return rho
    if primal_res_norm > 10.0 * dual_res_norm:
        return 2.0 * rho
    if dual_res_norm > 100.0 * rho * primal_res_norm:
        return rho / 2.0
    return rho


def update_x(
    model: ForwardModel,
    v: NDArray,
    eta: NDArray,
    field: FieldTag = FieldTag.COMPLEX,
    reg: HuberTV | None = None,
    rho: float = 1.0,
    l1: bool = False,
    x0: NDArray | None = None,
    inner_iters: int = 50,
    inner_tol: float = 1e-8,
    direct_threshold: int = 64,
) -> NDArray:
    """Least-squares x update, with optional Huber or l1 regularization.

    Unregularized: solves A'A x = A'(v + eta), via the diagonal of A'A when
    available, a direct solve for small N, else CG. Regularized: minimizes
    (rho/2)||Ax - v - eta||^2 + beta R(x).
    """
    w = v + eta
    if model.offset_raw is not None:
        w = w - model.scale * model.offset_raw
    rhs = model.adjoint(w)
    if field.is_real:
        rhs = rhs.real.astype(complex)

    def normal_op(z):
        out = model.adjoint(model.apply_linear(z))
        return out.real.astype(complex) if field.is_real else out

    if reg is None or reg.beta == 0.0:
        diag = model.normal_diag()
        if diag is not None:
            x = rhs / diag
        elif model.cols <= direct_threshold:
            a = model.densify()
            h = a.conj().T @ a
            if field.is_real:
                h = h.real
            if np.linalg.cond(h) > 1e14:
                raise np.linalg.LinAlgError("A'A is singular")
            x = np.linalg.solve(h, rhs.real if field.is_real else rhs).astype(complex)
        else:
            x = cg_solve(normal_op, rhs, iters=inner_iters, tol=inner_tol)
        return project_field(x, field)

    start = x0 if x0 is not None else np.zeros(model.cols, dtype=complex)
    if not l1:
        # (rho/2)||Ax - w||^2 + beta 1'h.(Tx) = 1/2 x'(rho A'A)x - Re<rho A'w, x> + ...
        scaled_reg = HuberTV(reg.beta, reg.alpha, reg.diff_op)
        return minimize_quad_plus_huber(
            lambda z: rho * normal_op(z),
            rho * rhs,
            start,
            scaled_reg,
            field,
            inner_iters=inner_iters,
            tol=inner_tol,
        )
    # proximal gradient on the smooth LS part with T-domain soft-thresholding
    diag = model.normal_diag()
    if diag is not None:
        lip = rho * float(np.max(diag))
    else:
        a = model.densify() if model.cols <= direct_threshold else None
        if a is not None:
            lip = rho * float(np.linalg.norm(a, ord=2) ** 2)
        else:
            lam, _ = power_method(normal_op, model.cols, iters=50, seed=5)
            lip = rho * 1.05 * lam
    step = 1.0 / max(lip, 1e-30)
    x = start.copy()
    top = reg.diff_op
    for _ in range(inner_iters):
        g = rho * (normal_op(x) - rhs)
        z = x - step * g
        tz = top.apply(z)
        x_new = z + top.adjoint(soft_threshold(tz, step * reg.beta) - tz)
        x_new = project_field(x_new, field)
        if np.linalg.norm(x_new - x) <= inner_tol * max(1.0, np.linalg.norm(x)):
            return x_new
        x = x_new
    return x


def run_admm(
    obj: PoissonObjective,
    x0: SignalVector,
    n_iters: int,
    rho0: float = 8.0,
    reg: HuberTV | None = None,
    l1: bool = False,
    x_true: NDArray | None = None,
    inner_iters: int = 50,
) -> RunState:
    """ADMM outer loop: v (phase then magnitude), x, dual, penalty update."""
    model = obj.model
    field = x0.field
    x = x0.values.copy()
    ax = model.apply(x)
    v = ax.copy()
    eta = v - ax  # zero by initialization
    rho = float(rho0)
    b_zero = np.all(obj.b == 0)
    state = RunState(x=x)
    beta = reg.beta if reg is not None else 0.0

    def total_cost(z):
        c = obj.cost(z)
        if reg is not None:
            if l1:
                c += beta * float(np.sum(np.abs(reg.diff_op.apply(z))))
            else:
                c += beta * reg.value(z)
        return c

    elapsed = 0.0
    for k in range(1, n_iters + 1):
        t0 = time.perf_counter()
        v_old = v
        u = ax - eta
        phase = update_v_phase(ax, eta)
        t = np.abs(u)
        if b_zero:
            mag = update_v_magnitude_b0(t, obj.y, rho)
        else:
            mag = update_v_magnitude_bpos(t, obj.y, obj.b, rho)
        v = np.atleast_1d(mag) * phase
        x = update_x(
            model, v, eta, field=field, reg=reg, rho=rho, l1=l1,
            x0=x, inner_iters=inner_iters,
        )
        ax = model.apply(x)
        eta = update_dual(eta, v, ax)
        primal = float(np.linalg.norm(ax - v))
        dual = float(np.linalg.norm(rho * model.adjoint(v - v_old)))
        rho = update_rho(rho, primal, dual, k)
        elapsed += time.perf_counter() - t0
        nr, ps = _metrics(x, x_true)
        state.trace.append(TraceRow(k, elapsed, total_cost(x), nr, ps))
    state.x = x
    return state
