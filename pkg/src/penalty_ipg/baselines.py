"""PGM and FISTA for the unconstrained composite problem ``min f + h``."""

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, DivergenceError
from .linalg import as_vector
from .solver import IterationRecord, SolveReport, relative_changes


@dataclass(frozen=True)
class CompositeProblem:
    """``f + h`` with a prox for `f` and an `L_h`-Lipschitz gradient for `h`.

    `split`, when given, maps ``x`` to the ``(objective, penalty)`` pair that
    is monitored by the stopping rule and reported in the trace. It defaults to
    ``(f(x) + h(x), 0)``.
    """

    prox_f: Optional[Callable]
    grad_h: Callable
    L_h: float
    value_f: Optional[Callable] = None
    value_h: Optional[Callable] = None
    split: Optional[Callable] = None

    def __post_init__(self):
        if not self.L_h > 0:
            raise ContractError(f"L_h must be positive, got {self.L_h}")

    def prox(self, v, r):
        if self.prox_f is None:
            return v
        return np.asarray(self.prox_f(v, r), dtype=np.float64)

    def value(self, x):
        total = 0.0
        if self.value_f is not None:
            total += float(self.value_f(x))
        if self.value_h is not None:
            total += float(self.value_h(x))
        return total

    def monitored(self, x):
        if self.split is not None:
            obj, pen = self.split(x)
            return float(obj), float(pen)
        return self.value(x), 0.0


def pgm_step(x, p, gamma, override=False):
    """One forward-backward step ``prox_{gamma f}(x - gamma grad h(x))``."""
    if not override and not 0 < gamma < 2.0 / p.L_h:
        raise ContractError(f"PGM step {gamma} outside (0, 2/L_h) = (0, {2.0 / p.L_h})")
    return p.prox(x - gamma * np.asarray(p.grad_h(x), dtype=np.float64), gamma)


def fista_step(x, y, t, p):
    """One FISTA step with fixed step ``1/L_h``; returns ``(x', y', t')``."""
    if t < 1:
        raise ContractError(f"FISTA momentum t must be >= 1, got {t}")
    step = 1.0 / p.L_h
    x_new = p.prox(y - step * np.asarray(p.grad_h(y), dtype=np.float64), step)
    t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
    y_new = x_new + ((t - 1.0) / t_new) * (x_new - x)
    return x_new, y_new, t_new


def run_baseline(p, method, iters, stop=None, x0=None, gamma=None, monitor=None, oracle=None):
    """Run PGM or FISTA from `x0` for at most `iters` iterations.

    `stop` (a :class:`StoppingRule`) may end the run early; without it exactly
    `iters` steps are taken. The PGM step defaults to ``1.9 / L_h``. The
    returned report has the same shape as the penalty solver's; columns that
    have no meaning here (penalty gradient, inner displacement) stay blank.
    The FISTA momentum values are kept in the ``t`` extra column.
    """
    method = method.lower()
    if method not in ("pgm", "fista"):
        raise ContractError(f"unknown baseline {method!r}")
    if iters < 0:
        raise ContractError("iters must be >= 0")
    if gamma is None:
        gamma = 1.9 / p.L_h
    x = as_vector(x0, "x0").copy()
    y, t = x.copy(), 1.0
    obj, pen = p.monitored(x)
    trace = []
    started = time.perf_counter()
    converged = stop is None or stop.eps is None
    done = 0
    for k in range(1, iters + 1):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if method == "pgm":
                x_new = pgm_step(x, p, gamma)
            else:
                x_new, y, t = fista_step(x, y, t, p)
            if not np.all(np.isfinite(x_new)):
                raise DivergenceError(k, 1)
            obj_new, pen_new = p.monitored(x_new)
            if not (np.isfinite(obj_new) and np.isfinite(pen_new)):
                raise DivergenceError(k, 1, f"objective overflows at iteration {k}")
            extra = {} if monitor is None else dict(monitor(x_new))
        if method == "fista":
            extra["t"] = t
        trace.append(
            IterationRecord(
                k=k,
                g=pen_new,
                grad_g_norm=None,
                inner_disp_sq=None,
                obj_F=obj_new,
                dist_to_oracle=None if oracle is None else float(np.linalg.norm(x_new - oracle)),
                elapsed_s=time.perf_counter() - started,
                extra=extra,
            )
        )
        done = k
        change = max(relative_changes(x, x_new, obj, obj_new, pen, pen_new))
        trace[-1].rel_change = change
        fired = stop is not None and stop.eps is not None and change <= stop.eps
        x, obj, pen = x_new, obj_new, pen_new
        if fired:
            converged = True
            break
    return SolveReport(
        x=x,
        iterations=done,
        converged=converged,
        elapsed_s=time.perf_counter() - started,
        trace=trace,
        method=method,
    )
