"""Poisson and Gaussian ML cost functions, Fisher marginals, and the
Huber-smoothed anisotropic TV regularizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .operators import FieldTag, ForwardModel


def psi(v, y, b):
    """Marginal Poisson negative log-likelihood (|v|^2+b) - y log(|v|^2+b).

    0 log 0 is treated as 0: a zero-mean Poisson draw is always 0.
    """
    v, y, b = np.asarray(v), np.asarray(y, float), np.asarray(b, float)
    rate = np.abs(v) ** 2 + b
    if np.any((rate == 0) & (y > 0)):
        raise ValueError("psi undefined: zero rate with positive count")
    out = rate - y * np.log(np.where(rate > 0, rate, 1.0))
    return out if out.ndim else float(out)


def psi_dot(v, y, b):
    """Ascent direction of psi: 2v(1 - y/(|v|^2 + b))."""
    v, y, b = np.asarray(v, complex), np.asarray(y, float), np.asarray(b, float)
    rate = np.abs(v) ** 2 + b
    if np.any(rate == 0):
        raise ValueError("psi_dot undefined at |v|^2 + b = 0")
    out = 2.0 * v * (1.0 - y / rate)
    return out if out.ndim else complex(out)


def psi_ddot(v, y, b):
    """Second derivative sign(v) (2 + 2y(|v|^2 - b)/(|v|^2 + b)^2).

    For b > 0 it is bounded above by 2 + y/(4b); the maximum is attained at
    |v|^2 = 3b. (The lower end can exceed that magnitude: at v = 0 the value
    is 2 - 2y/b.)
    """
    v, y, b = np.asarray(v), np.asarray(y, float), np.asarray(b, float)
    av2 = np.abs(v) ** 2
    rate = av2 + b
    if np.any(rate == 0):
        raise ValueError("psi_ddot undefined at |v|^2 + b = 0")
    sign = np.where(np.real(v) < 0, -1.0, 1.0)
    out = sign * (2.0 + 2.0 * y * (av2 - b) / rate**2)
    return out if out.ndim else float(out)


def fisher_marginal_poisson(v, b):
    """Marginal Poisson Fisher information 4|v|^2/(|v|^2 + b)."""
    av2 = np.abs(np.asarray(v)) ** 2
    rate = av2 + np.asarray(b, float)
    return np.divide(4.0 * av2, rate, out=np.zeros_like(rate), where=rate > 0)


def fisher_marginal_gaussian(v, b):
    """Marginal Fisher information 16|v|^2(|v|^2 + b) for the Gaussian cost."""
    av2 = np.abs(np.asarray(v)) ** 2
    return 16.0 * av2 * (av2 + np.asarray(b, float))


class PoissonObjective:
    """Negative Poisson log-likelihood f(x) = sum_i psi((Ax)_i; y_i, b_i)."""

    def __init__(self, model: ForwardModel, y: NDArray, field: FieldTag = FieldTag.COMPLEX):
        y = np.asarray(y, dtype=float)
        if y.shape != (model.rows,):
            raise ValueError(
                f"measurements have shape {y.shape}, model has {model.rows} rows"
            )
        self.model = model
        self.y = y
        self.b = model.background
        self.field = field

    def cost(self, x: NDArray) -> float:
        return float(np.sum(psi(self.model.apply(x), self.y, self.b)))

    def marginal_grad(self, v: NDArray) -> NDArray:
        return psi_dot(v, self.y, self.b)

    def gradient(self, x: NDArray) -> NDArray:
        g = self.model.adjoint(self.marginal_grad(self.model.apply(x)))
        return self._fieldify(g)

    def fisher_diag(self, v: NDArray) -> NDArray:
        return fisher_marginal_poisson(v, self.b)

    def _fieldify(self, g: NDArray) -> NDArray:
        return g.real.astype(complex) if self.field.is_real else g


class GaussianObjective(PoissonObjective):
    """Gaussian ML cost g(x) = sum_i (y_i - b_i - |(Ax)_i|^2)^2."""

    def cost(self, x: NDArray) -> float:
        r = self.y - self.b - np.abs(self.model.apply(x)) ** 2
        return float(np.sum(r * r))

    def marginal_grad(self, v: NDArray) -> NDArray:
        return 4.0 * (np.abs(v) ** 2 - self.y + self.b) * v

    def fisher_diag(self, v: NDArray) -> NDArray:
        return fisher_marginal_gaussian(v, self.b)


def huber(t, alpha: float):
    """Huber function of the modulus: |t|^2/2 below the knee, affine above."""
    if alpha <= 0:
        raise ValueError("huber knee alpha must be positive")
    at = np.abs(np.asarray(t))
    out = np.where(at < alpha, 0.5 * at**2, alpha * at - 0.5 * alpha**2)
    return out if out.ndim else float(out)


def huber_dot(t, alpha: float):
    """Derivative of huber: t inside the knee, alpha*sign(t) outside."""
    if alpha <= 0:
        raise ValueError("huber knee alpha must be positive")
    t = np.asarray(t, complex)
    at = np.abs(t)
    sign = np.divide(t, at, out=np.zeros_like(t), where=at > 0)
    out = np.where(at < alpha, t, alpha * sign)
    return out if out.ndim else complex(out)


def huber_weight(t, alpha: float):
    """Quadratic-majorizer weight min(alpha/|t|, 1), with value 1 at t = 0."""
    if alpha <= 0:
        raise ValueError("huber knee alpha must be positive")
    at = np.abs(np.asarray(t))
    out = np.where(at > alpha, np.divide(alpha, at, out=np.ones_like(at), where=at > 0), 1.0)
    return out if out.ndim else float(out)


class DiffOp:
    """Anisotropic finite-difference matrix T.

    1D chain differences for vectors; stacked horizontal and vertical first
    differences for images. Constant signals map to zero.
    """

    def __init__(self, n: int, dims: tuple[int, int] | None = None):
        self.n = n
        self.dims = dims
        if dims is None:
            self.k = n - 1
        else:
            h, w = dims
            if h * w != n:
                raise ValueError("dims inconsistent with signal length")
            self.k = h * (w - 1) + (h - 1) * w

    def apply(self, x: NDArray) -> NDArray:
        x = np.asarray(x)
        if self.dims is None:
            return x[1:] - x[:-1]
        h, w = self.dims
        img = x.reshape(h, w)
        dh = (img[:, 1:] - img[:, :-1]).ravel()
        dv = (img[1:, :] - img[:-1, :]).ravel()
        return np.concatenate([dh, dv])

    def adjoint(self, z: NDArray) -> NDArray:
        z = np.asarray(z)
        if self.dims is None:
            out = np.zeros(self.n, dtype=z.dtype)
            out[1:] += z
            out[:-1] -= z
            return out
        h, w = self.dims
        kh = h * (w - 1)
        zh = z[:kh].reshape(h, w - 1)
        zv = z[kh:].reshape(h - 1, w)
        out = np.zeros((h, w), dtype=z.dtype)
        out[:, 1:] += zh
        out[:, :-1] -= zh
        out[1:, :] += zv
        out[:-1, :] -= zv
        return out.ravel()

    def densify(self) -> NDArray:
        cols = []
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = 1.0
            cols.append(self.apply(e))
        return np.stack(cols, axis=1)


@dataclass
class HuberTV:
    """Huber-smoothed anisotropic TV: R(x) = 1' h.(Tx; alpha), weighted by beta."""

    beta: float
    alpha: float
    diff_op: DiffOp

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("regularization strength beta must be nonnegative")
        if self.alpha <= 0:
            raise ValueError("Huber knee alpha must be positive")

    def value(self, x: NDArray) -> float:
        """Unweighted R(x)."""
        return float(np.sum(huber(self.diff_op.apply(x), self.alpha)))

    def gradient(self, x: NDArray) -> NDArray:
        """beta * T' hdot(Tx; alpha)."""
        return self.beta * self.diff_op.adjoint(
            huber_dot(self.diff_op.apply(x), self.alpha)
        )

    def weights(self, x: NDArray) -> NDArray:
        """Diagonal D2 = min(alpha / |Tx|, 1) at the current point."""
        return huber_weight(self.diff_op.apply(x), self.alpha)


def reg_cost(x: NDArray, reg: HuberTV) -> float:
    return reg.value(x)


def reg_gradient(x: NDArray, reg: HuberTV) -> NDArray:
    return reg.gradient(x)


class RegularizedObjective:
    """Psi(x) = f(x) + beta R(x) with gradient for WF-style solvers."""

    def __init__(self, data: PoissonObjective, reg: HuberTV):
        self.data = data
        self.reg = reg
        self.model = data.model
        self.field = data.field

    def cost(self, x: NDArray) -> float:
        return self.data.cost(x) + self.reg.beta * self.reg.value(x)

    def gradient(self, x: NDArray) -> NDArray:
        g = self.data.gradient(x) + self.reg.gradient(x)
        return self.data._fieldify(g)
