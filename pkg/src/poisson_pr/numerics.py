"""Shared numerical kernels: power method, CG, root finders, LBFGS."""

from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.typing import NDArray


def real_dot(a: NDArray, b: NDArray) -> float:
    """Real inner product Re<a, b>, the one relevant for descent directions."""
    return float(np.real(np.vdot(a, b)))


def power_method(
    op: Callable[[NDArray], NDArray],
    n: int,
    iters: int = 200,
    seed: int = 0,
    dtype=np.complex128,
) -> tuple[float, NDArray]:
    """Leading eigenpair of a Hermitian PSD operator given as a callable.

    Returns (eigenvalue, unit-norm eigenvector). The Rayleigh quotient is
    non-decreasing across iterations for PSD operators.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n).astype(dtype)
    if np.issubdtype(dtype, np.complexfloating):
        v = v + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = op(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        v = w / nw
        lam = real_dot(v, op(v))
    return lam, v


def cg_solve(
    op: Callable[[NDArray], NDArray],
    rhs: NDArray,
    iters: int = 30,
    tol: float = 1e-9,
    x0: NDArray | None = None,
) -> NDArray:
    """Conjugate gradient for Hermitian positive-semidefinite `op`.

    Stops when the relative residual drops below `tol` or after `iters`
    iterations. Exact in <= N steps in exact arithmetic.
    """
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - op(x)
    p = r.copy()
    rs = real_dot(r, r)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)
    for _ in range(iters):
        if np.sqrt(rs) <= tol * rhs_norm:
            break
        ap = op(p)
        denom = real_dot(p, ap)
        if denom <= 0.0:
            break  # operator numerically indefinite along p
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = real_dot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def _newton_polish_cubic(coeffs: tuple[float, float, float, float], r: float) -> float:
    c3, c2, c1, c0 = coeffs
    for _ in range(2):
        f = ((c3 * r + c2) * r + c1) * r + c0
        df = (3.0 * c3 * r + 2.0 * c2) * r + c1
        if df == 0.0:
            break
        r = r - f / df
    return r


def cubic_real_roots(c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """All real roots (with multiplicity) of c3 m^3 + c2 m^2 + c1 m + c0.

    Uses the trigonometric/Cardano closed form followed by a Newton polish,
    which behaves better than naive Cardano near repeated roots.
    """
    if c3 == 0.0:
        if c2 == 0.0:
            if c1 == 0.0:
                return []
            return [-c0 / c1]
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return []
        sq = np.sqrt(disc)
        return sorted([(-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)])

    # Depressed cubic z^3 + p z + q with m = z - c2/(3 c3).
    shift = c2 / (3.0 * c3)
    p = (3.0 * c3 * c1 - c2 * c2) / (3.0 * c3 * c3)
    q = (2.0 * c2**3 - 9.0 * c3 * c2 * c1 + 27.0 * c3 * c3 * c0) / (27.0 * c3**3)
    disc = -4.0 * p**3 - 27.0 * q * q
    disc_scale = max(abs(4.0 * p**3), abs(27.0 * q * q))
    roots: list[float]
    if abs(p) < 1e-300 and abs(q) < 1e-300:
        roots = [0.0, 0.0, 0.0]
    elif abs(disc) <= 1e-12 * disc_scale:
        # repeated root: disc = 0 up to rounding; closed forms avoid the
        # catastrophic cancellation of the generic branches
        roots = [3.0 * q / p, -3.0 * q / (2.0 * p), -3.0 * q / (2.0 * p)]
    elif disc > 0.0:
        # three real roots, trigonometric form (p < 0 here)
        m = 2.0 * np.sqrt(-p / 3.0)
        theta = np.arccos(np.clip(3.0 * q / (p * m), -1.0, 1.0)) / 3.0
        roots = [m * np.cos(theta - 2.0 * np.pi * k / 3.0) for k in range(3)]
    else:
        half_q = q / 2.0
        s = np.sqrt(max(half_q * half_q + p**3 / 27.0, 0.0))
        u = np.cbrt(-half_q + s)
        v = np.cbrt(-half_q - s)
        roots = [u + v]
    out = [_newton_polish_cubic((c3, c2, c1, c0), z - shift) for z in roots]
    return sorted(out)


def soft_threshold(z: NDArray | complex, tau: float) -> NDArray | complex:
    """Complex soft-thresholding: sign(z) * max(|z| - tau, 0)."""
    mag = np.abs(z)
    scale = np.maximum(mag - tau, 0.0) / np.where(mag > 0, mag, 1.0)
    return z * scale


def finite_diff_grad(
    cost: Callable[[NDArray], float], x: NDArray, eps: float = 1e-6
) -> NDArray:
    """Central-difference gradient oracle.

    For complex inputs, differences are taken along the real and imaginary
    axes separately, matching the ascent-direction convention: the returned
    vector g satisfies Re<g, d> ~ directional derivative along d.
    """
    g = np.zeros_like(x, dtype=complex if np.iscomplexobj(x) else float)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (cost(x + e) - cost(x - e)) / (2.0 * eps)
        if np.iscomplexobj(x):
            e[i] = 1j * eps
            g[i] += 1j * (cost(x + e) - cost(x - e)) / (2.0 * eps)
    return g


def _wolfe_line_search(
    fg: Callable[[NDArray], tuple[float, NDArray]],
    x: NDArray,
    f0: float,
    g0: NDArray,
    p: NDArray,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 25,
) -> tuple[float, float, NDArray]:
    """Backtracking/expanding line search satisfying the weak Wolfe conditions."""
    d0 = real_dot(g0, p)
    lo, hi = 0.0, np.inf
    t = 1.0
    f_t, g_t = f0, g0
    for _ in range(max_evals):
        f_t, g_t = fg(x + t * p)
        d_t = real_dot(g_t, p)
        if f_t > f0 + c1 * t * d0:
            hi = t
        elif d_t < c2 * d0:
            lo = t
        else:
            # secant refinement toward the line-critical point; exact for
            # quadratics, so quadratic objectives converge in ~N iterations
            if d_t != d0:
                t_star = t * d0 / (d0 - d_t)
                if t_star > 0.0 and np.isfinite(t_star):
                    f_s, g_s = fg(x + t_star * p)
                    if f_s <= f_t:
                        return t_star, f_s, g_s
            return t, f_t, g_t
        t = 2.0 * lo if np.isinf(hi) else 0.5 * (lo + hi)
        if t == 0.0:
            break
    return t, f_t, g_t


def lbfgs_minimize(
    fg: Callable[[NDArray], tuple[float, NDArray]],
    x0: NDArray,
    memory: int = 10,
    n_iters: int = 100,
    grad_tol: float = 0.0,
    callback: Callable[[NDArray], None] | None = None,
) -> NDArray:
    """LBFGS with the standard two-loop recursion and a weak Wolfe search.

    `fg` returns (cost, gradient); complex iterates use the real inner
    product, so gradients may be Wirtinger ascent directions.
    """
    x = x0.copy()
    f, g = fg(x)
    s_hist: list[NDArray] = []
    y_hist: list[NDArray] = []
    for _ in range(n_iters):
        gnorm = np.linalg.norm(g)
        if gnorm == 0.0 or gnorm <= grad_tol:
            break
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            a = real_dot(s, q) / real_dot(y, s)
            alphas.append(a)
            q = q - a * y
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            q = q * (real_dot(y, s) / real_dot(y, y))
        for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
            b = real_dot(y, q) / real_dot(y, s)
            q = q + (a - b) * s
        p = -q
        if real_dot(g, p) >= 0.0:
            p = -g  # fall back to steepest descent
        t, f_new, g_new = _wolfe_line_search(fg, x, f, g, p)
        if t == 0.0 or not np.isfinite(f_new):
            break
        s_vec = t * p
        y_vec = g_new - g
        if real_dot(y_vec, s_vec) > 1e-14:  # keep positive-curvature pairs only
            s_hist.append(s_vec)
            y_hist.append(y_vec)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        x = x + s_vec
        f, g = f_new, g_new
        if callback is not None:
            callback(x)
    return x
