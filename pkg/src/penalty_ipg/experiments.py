"""Benchmark drivers: ISNR grids, Heron sweeps, per-iteration curves."""

import csv
import io
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import run_baseline
from .errors import ContractError, InsufficientDataError
from .imageio import read_pgm, write_pgm
from .problems import build_heron, build_inpainting, isnr, traditional_composite
from .solver import PenaltyFunction, StepSchedule, StoppingRule, solve, validate_hypotheses

logger = logging.getLogger(__name__)

TOLERANCES = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)

# best settings per method reported for the inpainting comparison
BEST_SETTINGS = {
    "ipg": {"lambda1": 1.0, "lambda2": 1e-4, "a": 1.1, "b": 1.8},
    "pgm": {"lambda1": 0.1, "lambda2": 1e-8, "gamma_factor": 1.9},
    "fista": {"lambda1": 0.05, "lambda2": 1e-4},
}


@dataclass
class ExperimentConfig:
    experiment: str = "inpaint"
    solver: str = "ipg"
    image: Optional[str] = None
    missing: float = 0.6
    lambda1: list = field(default_factory=lambda: [1.0])
    lambda2: list = field(default_factory=lambda: [1e-4])
    a: list = field(default_factory=lambda: [1.1])
    b: list = field(default_factory=lambda: [1.8])
    gamma: Optional[list] = None
    gamma_factor: list = field(default_factory=lambda: [1.9])
    eps: Optional[float] = None
    iters: Optional[int] = None
    max_iters: int = 1_000_000
    seed: int = 0
    samples: int = 10
    m: list = field(default_factory=lambda: [5])
    n: list = field(default_factory=lambda: [2])
    consistent: bool = True
    levels: Optional[int] = None
    out: str = "results"
    curves: bool = False
    save_images: bool = False
    figures: bool = False
    timing: bool = True
    jobs: int = 1
    override: bool = False

    def __post_init__(self):
        if self.experiment not in ("inpaint", "heron"):
            raise ContractError(f"unknown experiment {self.experiment!r}")
        if self.solver not in ("ipg", "pgm", "fista"):
            raise ContractError(f"unknown solver {self.solver!r}")
        if self.eps is not None and not self.eps > 0:
            raise ContractError("eps must be positive")
        for name in ("lambda1", "lambda2", "a", "b", "m", "n"):
            if not getattr(self, name):
                raise ContractError(f"parameter grid {name!r} is empty")
        if self.samples < 1:
            raise ContractError("samples must be >= 1")

    def stopping(self, mode):
        """Fixed iterations when only `iters` is set, tolerance mode otherwise."""
        if self.eps is None:
            iters = 20 if self.iters is None else self.iters
            return StoppingRule.fixed(iters, mode)
        cap = self.max_iters if self.iters is None else self.iters
        return StoppingRule(self.eps, cap, mode)

    def manifest_lines(self):
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, list):
                value = ",".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return lines


@dataclass
class ResultTable:
    """Long-format results; ``value`` is None for cells that were not run."""

    params: list
    metric: str
    rows: list = field(default_factory=list)
    extra_columns: list = field(default_factory=list)
    runs: int = 0

    def add(self, key, value, **extra):
        self.rows.append({"key": dict(key), "value": value, "extra": extra})

    def value(self, **key):
        for r in self.rows:
            if all(r["key"].get(k) == v for k, v in key.items()):
                return r["value"]
        raise KeyError(key)

    def varying(self):
        return [p for p in self.params if len({r["key"][p] for r in self.rows}) > 1]

    def to_csv(self, path=None, decimals=4):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.params + [self.metric] + self.extra_columns)
        for r in self.rows:
            row = [_num(r["key"][p]) for p in self.params]
            row.append("" if r["value"] is None else f"{r['value']:.{decimals}f}")
            row.extend(_cell(r["extra"].get(c), decimals) for c in self.extra_columns)
            w.writerow(row)
        return _emit(buf.getvalue(), path)

    def to_wide_csv(self, path=None, row_param=None, col_param=None, decimals=4):
        """Pivot on two parameters; blank cells are written as ``-``."""
        vary = self.varying()
        if row_param is None or col_param is None:
            if len(vary) > 2:
                raise ContractError(f"more than two parameters vary: {vary}")
            rest = [p for p in self.params if p not in vary]
            pick = (vary + rest)[:2]
            col_param, row_param = pick[0], pick[1]
        cols = sorted({r["key"][col_param] for r in self.rows})
        rws = sorted({r["key"][row_param] for r in self.rows})
        grid = {(r["key"][row_param], r["key"][col_param]): r["value"] for r in self.rows}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{row_param}\\{col_param}"] + [_num(c) for c in cols])
        for rv in rws:
            cells = []
            for cv in cols:
                v = grid.get((rv, cv))
                cells.append("-" if v is None else f"{v:.{decimals}f}")
            w.writerow([_num(rv)] + cells)
        return _emit(buf.getvalue(), path)


def _num(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cell(v, decimals):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{decimals}f}"
    return str(v)


def _emit(text, path):
    if path is None:
        return text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def load_image(path):
    return read_pgm(path)


def _cell_label(key):
    return "_".join(f"{k}{_num(v)}" for k, v in key.items())


def run_inpainting(inst, solver, stop, *, a=1.1, b=1.8, gamma=None, override=False):
    """Run one solver on an inpainting instance with an ISNR monitor."""

    def monitor(x):
        return {"isnr": isnr(inst.clean, inst.observed, x)}

    if solver == "ipg":
        return solve(inst, StepSchedule(a, b), stop, override=override, monitor=monitor)
    p = traditional_composite(inst)
    return run_baseline(p, solver, stop.max_iters, stop=stop, x0=inst.x0, gamma=gamma, monitor=monitor)


def final_isnr(inst, report):
    return isnr(inst.clean, inst.observed, report.x)


def _inpaint_cells(cfg):
    if cfg.solver == "ipg":
        names = ["lambda1", "lambda2", "a", "b"]
        grids = [cfg.lambda1, cfg.lambda2, cfg.a, cfg.b]
    elif cfg.solver == "pgm":
        if cfg.gamma is not None:
            names, grids = ["lambda1", "lambda2", "gamma"], [cfg.lambda1, cfg.lambda2, cfg.gamma]
        else:
            names = ["lambda1", "lambda2", "gamma_factor"]
            grids = [cfg.lambda1, cfg.lambda2, cfg.gamma_factor]
    else:
        names, grids = ["lambda1", "lambda2"], [cfg.lambda1, cfg.lambda2]
    return names, [dict(zip(names, combo)) for combo in itertools.product(*grids)]


def _inpaint_admissible(cfg, key):
    """Whether a grid cell may run; cells failing the step conditions stay blank."""
    if cfg.override:
        return True
    if cfg.solver == "ipg":
        # the inpainting penalty always has L_g = 1 and growth constant 1
        g = PenaltyFunction(value=lambda x: 0.0, grad=np.zeros_like, L=1.0, growth_constant=1.0)
        return validate_hypotheses(StepSchedule(key["a"], key["b"]), g).ok
    if cfg.solver == "pgm":
        L_h = key["lambda2"] + 1.0
        gamma = key.get("gamma", key.get("gamma_factor", 1.9) / L_h)
        return 0 < gamma < 2.0 / L_h
    return True


def run_isnr_grid(cfg, clean=None, out_dir=None):
    """ISNR after a fixed number of iterations (or at tolerance) for every grid cell.

    All cells share one seeded mask. Cells whose schedule fails the
    hypothesis check are recorded as blanks and never run. Reports and,
    when requested, reconstructions are written under `out_dir`.
    """
    if cfg.experiment != "inpaint":
        raise ContractError("run_isnr_grid needs experiment = inpaint")
    if clean is None:
        if cfg.image is None:
            raise ContractError("an input image is required for inpainting")
        clean = load_image(cfg.image)
    names, cells = _inpaint_cells(cfg)
    table = ResultTable(params=names, metric="isnr_db", extra_columns=["iterations", "converged"])
    stop = cfg.stopping("inpaint")
    out_dir = None if out_dir is None else Path(out_dir)

    def run_cell(key):
        inst = build_inpainting(clean, cfg.missing, key["lambda1"], key["lambda2"], cfg.seed, cfg.levels)
        gamma = key.get("gamma")
        if gamma is None and "gamma_factor" in key:
            gamma = key["gamma_factor"] / (key["lambda2"] + 1.0)
        report = run_inpainting(
            inst, cfg.solver, stop, a=key.get("a", 1.1), b=key.get("b", 1.8), gamma=gamma,
            override=cfg.override,
        )
        if out_dir is not None:
            label = f"{cfg.solver}_{_cell_label(key)}"
            if cfg.curves:
                emit_curves(report, out_dir / "curves" / f"{label}.csv")
            if cfg.save_images:
                (out_dir / "images").mkdir(parents=True, exist_ok=True)
                write_pgm(out_dir / "images" / f"{label}.pgm", report.x.reshape(clean.shape))
        return key, final_isnr(inst, report), report

    runnable = [k for k in cells if _inpaint_admissible(cfg, k)]
    results = {}
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            for key, val, rep in pool.map(run_cell, runnable):
                results[_cell_label(key)] = (val, rep)
    else:
        for key in runnable:
            _, val, rep = run_cell(key)
            results[_cell_label(key)] = (val, rep)
    table.runs = len(results)
    for key in cells:
        hit = results.get(_cell_label(key))
        if hit is None:
            table.add(key, None)
        else:
            val, rep = hit
            table.add(key, val, iterations=rep.iterations, converged=str(rep.converged).lower())
    return table


def run_heron_sweep(cfg, out_dir=None):
    """Average runtime and iteration count over `cfg.samples` seeded instances per cell.

    Sample ``s`` uses seed ``cfg.seed + s`` so every (a, b) cell sees the same
    instances. With ``cfg.curves`` the penalty trace of every run is written
    under ``out_dir/curves``.
    """
    if cfg.experiment != "heron":
        raise ContractError("run_heron_sweep needs experiment = heron")
    if cfg.solver != "ipg":
        raise ContractError("the Heron sweep runs the penalized incremental solver only")
    names = ["m", "n", "a", "b"]
    cells = [dict(zip(names, c)) for c in itertools.product(cfg.m, cfg.n, cfg.a, cfg.b)]
    extra = ["norm_A", "iterations", "converged"] + (["time_s"] if cfg.timing else [])
    table = ResultTable(params=names, metric="mean_time_s" if cfg.timing else "mean_iterations",
                        extra_columns=extra)
    stop = cfg.stopping("heron")
    if cfg.eps is None and cfg.iters is None:
        stop = StoppingRule(1e-6, cfg.max_iters, "heron")
    instances = {}

    def get_instance(m, n, s):
        key = (m, n, s)
        if key not in instances:
            instances[key] = build_heron(m, n, cfg.consistent, cfg.seed + s)
        return instances[key]

    def run_cell(key):
        times, iters, norms, conv = [], [], [], 0
        for s in range(cfg.samples):
            inst = get_instance(key["m"], key["n"], s)
            t0 = time.perf_counter()
            rep = solve(inst, inst.schedule(key["a"], key["b"]), stop, override=cfg.override)
            times.append(time.perf_counter() - t0)
            if cfg.curves and out_dir is not None:
                emit_curves(rep, Path(out_dir) / "curves" / f"heron_{_cell_label(key)}_s{s}.csv")
            iters.append(rep.iterations)
            norms.append(inst.norm_A)
            conv += int(rep.converged)
        return key, float(np.mean(times)), float(np.mean(iters)), float(np.mean(norms)), conv

    runnable = []
    for key in cells:
        inst = get_instance(key["m"], key["n"], 0)
        if cfg.override or validate_hypotheses(inst.schedule(key["a"], key["b"]), inst.penalty).ok:
            runnable.append(key)
    for m, n in sorted({(k["m"], k["n"]) for k in runnable}):
        for s in range(cfg.samples):
            get_instance(m, n, s)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            done = list(pool.map(run_cell, runnable))
    else:
        done = [run_cell(k) for k in runnable]
    found = {_cell_label(k): rest for k, *rest in done}
    table.runs = len(done) * cfg.samples
    for key in cells:
        hit = found.get(_cell_label(key))
        if hit is None:
            table.add(key, None)
            continue
        mean_t, mean_it, mean_norm, conv = hit
        extra_vals = {"norm_A": mean_norm, "iterations": mean_it, "converged": f"{conv}/{cfg.samples}"}
        if cfg.timing:
            extra_vals["time_s"] = mean_t
            table.add(key, mean_t, **extra_vals)
        else:
            table.add(key, mean_it, **extra_vals)
    return table


def emit_curves(report, path):
    """Write one per-iteration CSV: ``k``, ISNR (or ``g``), objective."""
    if not report.trace:
        raise InsufficientDataError("empty trace; nothing to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    has_isnr = "isnr" in report.extra_columns()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "isnr_db" if has_isnr else "g", "objective"])
    for r in report.trace:
        first = r.extra.get("isnr") if has_isnr else r.g
        w.writerow([r.k, repr(float(first)), repr(float(r.obj_F))])
    return _emit(buf.getvalue(), path)


def tolerance_sweep(report, tolerances=TOLERANCES, metric="isnr"):
    """Iteration count and metric value where each tolerance would stop the run.

    The iterates do not depend on the tolerance, so a single run to the
    smallest tolerance yields every row.
    """
    rows = []
    for eps in tolerances:
        hit = next((r for r in report.trace if r.rel_change is not None and r.rel_change <= eps), None)
        if hit is None:
            last = report.trace[-1] if report.trace else None
            rows.append({"eps": eps, "iterations": None if last is None else last.k, "reached": False,
                         metric: None if last is None else last.extra.get(metric)})
        else:
            rows.append({"eps": eps, "iterations": hit.k, "reached": True, metric: hit.extra.get(metric)})
    return rows


def write_tolerance_rows(rows, path, metric="isnr"):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "iterations", "reached", f"{metric}_db" if metric == "isnr" else metric])
    for r in rows:
        val = r[metric]
        w.writerow([repr(r["eps"]), r["iterations"], str(r["reached"]).lower(),
                    "" if val is None else f"{val:.4f}"])
    return _emit(buf.getvalue(), path)


def compare_inpainting(clean, missing=0.6, seed=0, iters=50, eps=1e-6, max_iters=5000, levels=None,
                       settings=None):
    """Run the three methods with their best reported settings on one mask.

    Returns ``{solver: (instance, fixed_report, tolerance_report)}``; the fixed
    run takes exactly `iters` steps, the tolerance run stops at `eps`.
    """
    settings = settings or BEST_SETTINGS
    out = {}
    for solver, prm in settings.items():
        inst = build_inpainting(clean, missing, prm["lambda1"], prm["lambda2"], seed, levels)
        gamma = None
        if solver == "pgm":
            gamma = prm.get("gamma_factor", 1.9) / (prm["lambda2"] + 1.0)
        fixed = run_inpainting(inst, solver, StoppingRule.fixed(iters, "inpaint"),
                               a=prm.get("a", 1.1), b=prm.get("b", 1.8), gamma=gamma)
        tol = run_inpainting(inst, solver, StoppingRule(eps, max_iters, "inpaint"),
                             a=prm.get("a", 1.1), b=prm.get("b", 1.8), gamma=gamma)
        out[solver] = (inst, fixed, tol)
    return out
