"""Incremental proximal gradient method with a smooth penalty term.

One outer iteration ``k`` (starting at ``k = 1``) does::

    phi_1     = x_k - alpha_k * beta_k * grad g(x_k)
    phi_{i+1} = prox_{alpha_k f_i}(phi_i - alpha_k * grad h_i(phi_i)),  i = 1..m
    x_{k+1}   = phi_{m+1}

with ``alpha_k = a / k`` and ``beta_k = b * k`` (optionally rescaled).
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, DivergenceError, InsufficientDataError
from .linalg import as_vector

HYPOTHESIS_RTOL = 1e-12

CSV_COLUMNS = ("k", "g", "grad_g_norm", "inner_disp_sq", "obj_F", "dist_to_oracle", "elapsed_s")


@dataclass(frozen=True)
class ObjectiveTerm:
    """One component ``F_i = f_i + h_i``.

    ``prox_f(v, r)`` must return ``prox_{r f_i}(v)``; ``None`` means ``f_i = 0``.
    ``grad_h`` returns the gradient of the smooth part (``None`` means
    ``h_i = 0``) and `L` is its Lipschitz constant.
    """

    prox_f: Optional[Callable] = None
    grad_h: Optional[Callable] = None
    L: float = 0.0
    value_f: Optional[Callable] = None
    value_h: Optional[Callable] = None

    def __post_init__(self):
        if self.L < 0:
            raise ContractError(f"Lipschitz constant must be >= 0, got {self.L}")

    def prox(self, v, r):
        if self.prox_f is None:
            return v
        return np.asarray(self.prox_f(v, r), dtype=np.float64)

    def forward(self, v, alpha):
        if self.grad_h is None:
            return v
        return v - alpha * np.asarray(self.grad_h(v), dtype=np.float64)

    def value(self, x):
        total = 0.0
        if self.value_f is not None:
            total += float(self.value_f(x))
        if self.value_h is not None:
            total += float(self.value_h(x))
        return total


@dataclass(frozen=True)
class PenaltyFunction:
    """Smooth convex constraint function whose minimizers form the feasible set.

    `growth_constant`, when known, is an ``a > 0`` with
    ``g(x) - min g >= (a/2) dist(x, argmin g)**2``.
    """

    value: Callable
    grad: Callable
    L: float
    min_value: float = 0.0
    growth_constant: Optional[float] = None

    def __post_init__(self):
        if not self.L > 0:
            raise ContractError(f"penalty Lipschitz constant must be positive, got {self.L}")
        if self.growth_constant is not None and not self.growth_constant > 0:
            raise ContractError("growth constant must be positive when given")

    @classmethod
    def zero(cls):
        return cls(value=lambda x: 0.0, grad=np.zeros_like, L=1.0)


@dataclass(frozen=True)
class StepSchedule:
    """``alpha_k = a / k`` and ``beta_k = b * k * beta_scale``.

    Use ``beta_scale = 1 / ||A||**2`` for the ``b k / ||A||^2`` penalty of the
    least-squares constraints.
    """

    a: float
    b: float
    beta_scale: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.beta_scale > 0):
            raise ContractError("schedule constants a, b and beta_scale must be positive")

    def alpha(self, k):
        return self.a / k

    def beta(self, k):
        return self.b * k * self.beta_scale

    @property
    def product(self):
        """The constant value of ``alpha_k * beta_k``."""
        return self.a * self.b * self.beta_scale


@dataclass(frozen=True)
class StoppingRule:
    """Relative-change test on the iterate, the objective and the penalty.

    With ``eps=None`` the solver runs exactly `max_iters` iterations.
    `mode` is ``"inpaint"`` (objective ``A``, penalty ``B``) or ``"heron"``
    (objective ``F``, penalty ``g``); both compare consecutive iterates.
    """

    eps: Optional[float] = 1e-6
    max_iters: int = 1_000_000
    mode: str = "heron"

    def __post_init__(self):
        if self.eps is not None and not self.eps > 0:
            raise ContractError(f"eps must be positive, got {self.eps}")
        if self.max_iters < 0:
            raise ContractError("max_iters must be >= 0")
        if self.mode not in ("inpaint", "heron"):
            raise ContractError(f"unknown stopping mode {self.mode!r}")

    @classmethod
    def fixed(cls, iters, mode="heron"):
        return cls(eps=None, max_iters=iters, mode=mode)


@dataclass
class ProblemInstance:
    terms: list
    penalty: PenaltyFunction
    x0: np.ndarray
    oracle: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.x0.size

    def objective(self, x):
        return sum(t.value(x) for t in self.terms)


@dataclass
class IterationRecord:
    k: int
    g: float
    grad_g_norm: Optional[float]
    inner_disp_sq: Optional[float]
    obj_F: float
    dist_to_oracle: Optional[float]
    elapsed_s: float
    extra: dict = field(default_factory=dict)
    rel_change: Optional[float] = None


@dataclass
class SolverState:
    """Iterate ``x_k`` with cached penalty value/gradient and objective at ``x_k``."""

    k: int
    x: np.ndarray
    g_value: float
    grad_g: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)

    @classmethod
    def initial(cls, x1, terms, g, k=1):
        x1 = as_vector(x1, "x1").copy()
        return cls(
            k=k,
            x=x1,
            g_value=float(g.value(x1)),
            grad_g=np.asarray(g.grad(x1), dtype=np.float64),
            objective=sum(t.value(x1) for t in terms),
        )


def incremental_pass(phi, terms, alpha, k=0):
    """Cyclic forward-backward pass over `terms` in index order.

    Returns the final point and ``sum_i ||phi_{i+1} - phi_i||**2``.
    """
    disp = 0.0
    for i, term in enumerate(terms, start=1):
        nxt = term.prox(term.forward(phi, alpha), alpha)
        if not np.all(np.isfinite(nxt)):
            raise DivergenceError(k, i)
        d = nxt - phi
        disp += float(d @ d)
        phi = nxt
    return phi, disp


def ipg_step(state, terms, g, sched, oracle=None, monitor=None):
    """Perform outer iteration ``state.k`` and return the state for ``k + 1``.

    A diagnostics record describing ``x_{k+1}`` is appended to the shared
    trace. `monitor`, if given, maps ``x_{k+1}`` to a dict of extra columns.
    """
    k = state.k
    if k < 1:
        raise ContractError("iteration counter starts at 1")
    alpha = sched.alpha(k)
    m = len(terms)
    # overflow surfaces as DivergenceError, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        phi = state.x - (alpha * sched.beta(k)) * state.grad_g
        if not np.all(np.isfinite(phi)):
            raise DivergenceError(k, 0)
        x_new, disp = incremental_pass(phi, terms, alpha, k)
        grad = np.asarray(g.grad(x_new), dtype=np.float64)
        g_value = float(g.value(x_new))
        if not (np.isfinite(g_value) and np.all(np.isfinite(grad))):
            raise DivergenceError(k, 0, f"penalty overflows at x_{k + 1} (k={k})")
        objective = sum(t.value(x_new) for t in terms)
        if not np.isfinite(objective):
            raise DivergenceError(k, m, f"objective overflows at x_{k + 1} (k={k})")
        extra = {} if monitor is None else dict(monitor(x_new))
    nxt = SolverState(
        k=k + 1,
        x=x_new,
        g_value=g_value,
        grad_g=grad,
        objective=objective,
        trace=state.trace,
        started=state.started,
    )
    state.trace.append(
        IterationRecord(
            k=k,
            g=nxt.g_value,
            grad_g_norm=float(np.linalg.norm(grad)),
            inner_disp_sq=disp,
            obj_F=nxt.objective,
            dist_to_oracle=None if oracle is None else float(np.linalg.norm(x_new - oracle)),
            elapsed_s=time.perf_counter() - state.started,
            extra=extra,
        )
    )
    return nxt


def relative_changes(x_prev, x_next, obj_prev, obj_next, pen_prev, pen_next):
    return (
        float(np.linalg.norm(x_next - x_prev)) / (float(np.linalg.norm(x_prev)) + 1.0),
        abs(obj_next - obj_prev) / (abs(obj_prev) + 1.0),
        abs(pen_next - pen_prev) / (abs(pen_prev) + 1.0),
    )


def stopping_check(prev, next, stop):
    """True iff the largest of the three relative changes is at most ``stop.eps``."""
    if stop.eps is None:
        return False
    changes = relative_changes(prev.x, next.x, prev.objective, next.objective, prev.g_value, next.g_value)
    return max(changes) <= stop.eps


@dataclass
class HypothesisResult:
    name: str
    status: str  # "pass", "fail" or "unverified"
    margin: Optional[float]
    detail: str


@dataclass
class ValidationReport:
    results: list

    @property
    def ok(self):
        return all(r.status != "fail" for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def summary(self):
        return "; ".join(
            f"{r.name}: {r.status}" + ("" if r.margin is None else f" (margin {r.margin:.6g})")
            for r in self.results
        )


def validate_hypotheses(sched, g):
    """Check the step/penalty conditions for ``alpha_k = a/k, beta_k = b k``.

    * H2 (non-summable, square-summable steps) holds for every ``a > 0``.
    * H3 requires ``a * b * beta_scale < 2 / L_g`` strictly.
    * H4 is accepted when `g` has a quadratic-growth constant (then
      ``sum 1/beta_k**2 < inf`` suffices); otherwise it is left unverified.
    """
    results = [HypothesisResult("H2", "pass", None, "alpha_k = a/k: sum alpha_k = inf, sum alpha_k^2 < inf")]
    bound = 2.0 / g.L
    prod = sched.product
    margin = bound - prod
    status = "pass" if prod < bound * (1.0 - HYPOTHESIS_RTOL) else "fail"
    results.append(HypothesisResult("H3", status, margin, f"alpha_k*beta_k = {prod:.6g} vs 2/L_g = {bound:.6g}"))
    if g.growth_constant is not None:
        results.append(
            HypothesisResult("H4", "pass", None, f"quadratic growth with a = {g.growth_constant:.6g}")
        )
    else:
        results.append(HypothesisResult("H4", "unverified", None, "no quadratic-growth constant supplied"))
    return ValidationReport(results)


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    converged: bool
    elapsed_s: float
    trace: list
    iterates: Optional[list] = None
    validation: Optional[ValidationReport] = None
    method: str = "ipg"

    def column(self, name):
        if name in CSV_COLUMNS:
            vals = [getattr(r, name) for r in self.trace]
        else:
            vals = [r.extra.get(name) for r in self.trace]
        return np.array([np.nan if v is None else v for v in vals], dtype=np.float64)

    def extra_columns(self):
        keys = []
        for r in self.trace:
            for key in r.extra:
                if key not in keys:
                    keys.append(key)
        return keys

    def to_csv(self, path=None, timing=True):
        """Write the trace as CSV; returns the text when `path` is None.

        With ``timing=False`` the elapsed column is left blank so the file is
        reproducible byte for byte.
        """
        extras = self.extra_columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + extras)
        for r in self.trace:
            row = [r.k]
            for name in CSV_COLUMNS[1:-1]:
                row.append(_fmt(getattr(r, name)))
            row.append(f"{r.elapsed_s:.4f}" if timing else "")
            row.extend(_fmt(r.extra.get(key)) for key in extras)
            w.writerow(row)
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def solve(problem, sched, stop, *, override=False, keep_iterates=False, monitor=None, x0=None):
    """Run the penalized incremental method on `problem`.

    Iterates until `stop` fires or ``stop.max_iters`` outer iterations are
    done. Hitting the cap is reported through ``converged=False``.

    Raises
    ------
    ContractError
        If the schedule fails hypothesis validation and `override` is False.
    DivergenceError
        If an iterate becomes non-finite.
    """
    report = validate_hypotheses(sched, problem.penalty)
    if not report.ok and not override:
        raise ContractError(f"schedule violates convergence hypotheses: {report.summary()}")
    terms, g = problem.terms, problem.penalty
    start = problem.x0 if x0 is None else x0
    state = SolverState.initial(start, terms, g)
    iterates = [state.x.copy()] if keep_iterates else None
    converged = False
    done = 0
    while done < stop.max_iters:
        nxt = ipg_step(state, terms, g, sched, oracle=problem.oracle, monitor=monitor)
        done += 1
        if keep_iterates:
            iterates.append(nxt.x.copy())
        change = max(
            relative_changes(state.x, nxt.x, state.objective, nxt.objective, state.g_value, nxt.g_value)
        )
        state.trace[-1].rel_change = change
        fired = stop.eps is not None and change <= stop.eps
        state = nxt
        if fired:
            converged = True
            break
    if stop.eps is None:
        converged = True
    return SolveReport(
        x=state.x,
        iterations=done,
        converged=converged,
        elapsed_s=time.perf_counter() - state.started,
        trace=state.trace,
        iterates=iterates,
        validation=report,
    )


@dataclass
class CheckReport:
    slack: np.ndarray
    slack_sum: float
    tail_slack_sum: float
    fejer_ok: bool
    final_g: Optional[float] = None
    g_ok: Optional[bool] = None
    final_grad_norm: Optional[float] = None
    grad_ok: Optional[bool] = None
    final_inner_disp: Optional[float] = None
    disp_ok: Optional[bool] = None

    @property
    def passed(self):
        flags = [self.fejer_ok, self.g_ok, self.grad_ok, self.disp_ok]
        return all(f for f in flags if f is not None)


def quasi_fejer_check(
    trace,
    u_star,
    *,
    tol=1e-6,
    g_tol=1e-8,
    grad_tol=None,
    disp_tol=None,
    g_min=0.0,
):
    """Empirical quasi-Fejer test of a run against a known solution `u_star`.

    `trace` is a :class:`SolveReport` run with ``keep_iterates=True`` or a
    plain sequence of iterates. The slack ``delta_k = max(0, ||x_{k+1}-u||^2 -
    ||x_k-u||^2)`` must sum to less than `tol` over the last half of the run.
    For a report, the final penalty excess ``g - g_min``, the penalty gradient
    norm and the inner displacement sum are also compared with their
    tolerances (``None`` skips the gradient or displacement test).
    """
    report = trace if hasattr(trace, "iterates") else None
    xs = report.iterates if report is not None else trace
    if xs is None:
        raise InsufficientDataError("report carries no iterates; solve with keep_iterates=True")
    xs = np.asarray([np.asarray(x, dtype=np.float64).ravel() for x in xs])
    if len(xs) < 10:
        raise InsufficientDataError(f"need at least 10 iterates, got {len(xs)}")
    u = np.asarray(u_star, dtype=np.float64).ravel()
    d2 = np.sum((xs - u) ** 2, axis=1)
    slack = np.maximum(0.0, np.diff(d2))
    tail = slack[len(slack) // 2:]
    out = CheckReport(
        slack=slack,
        slack_sum=float(slack.sum()),
        tail_slack_sum=float(tail.sum()),
        fejer_ok=bool(tail.sum() < tol),
    )
    if report is not None and report.trace:
        last = report.trace[-1]
        out.final_g = last.g - g_min
        out.g_ok = bool(out.final_g < g_tol)
        if last.grad_g_norm is not None:
            out.final_grad_norm = last.grad_g_norm
            if grad_tol is not None:
                out.grad_ok = bool(last.grad_g_norm < grad_tol)
        if last.inner_disp_sq is not None:
            out.final_inner_disp = last.inner_disp_sq
            if disp_tol is not None:
                out.disp_ok = bool(last.inner_disp_sq < disp_tol)
    return out
