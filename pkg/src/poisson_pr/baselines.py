"""LBFGS baseline runner producing the same trace format as the solvers."""

from __future__ import annotations

import time

import numpy as np
from numpy.typing import NDArray

from .init_eval import RunState, TraceRow
from .numerics import lbfgs_minimize
from .objectives import HuberTV, PoissonObjective
from .wf import _metrics


def run_lbfgs(
    obj: PoissonObjective,
    x0,
    n_iters: int,
    reg: HuberTV | None = None,
    memory: int = 10,
    x_true: NDArray | None = None,
) -> RunState:
    beta = reg.beta if reg is not None else 0.0

    def fg(z):
        c = obj.cost(z)
        g = obj.gradient(z)
        if reg is not None:
            c += beta * reg.value(z)
            g = obj._fieldify(g + reg.gradient(z))
        return c, g

    state = RunState(x=x0.values.copy())
    start = time.perf_counter()
    k = 0

    def callback(z):
        nonlocal k
        k += 1
        elapsed = time.perf_counter() - start
        nr, ps = _metrics(z, x_true)
        state.trace.append(TraceRow(k, elapsed, fg(z)[0], nr, ps))

    x = lbfgs_minimize(fg, x0.values.copy(), memory=memory, n_iters=n_iters,
                       callback=callback)
    state.x = x
    return state
