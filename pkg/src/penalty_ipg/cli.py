"""Command-line front end: ``ipg-bench``.

Examples::

    ipg-bench --experiment inpaint --image peppers.pgm --a 0.8:2:0.1 --b 0.5:2:0.1 --out t2
    ipg-bench --experiment inpaint --image peppers.pgm --compare --figures --out fig1
    ipg-bench --experiment heron --m 5 --n 2 --a 0.6 --b 1.9 --eps 1e-6 --out heron

Options may also come from a ``key = value`` file given with ``--config``;
command-line flags take precedence.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .errors import ContractError, DivergenceError

logger = logging.getLogger("penalty_ipg")

LIST_KEYS = {"lambda1", "lambda2", "a", "b", "gamma", "gamma_factor", "m", "n"}
INT_KEYS = {"iters", "max_iters", "seed", "samples", "levels", "jobs"}
FLOAT_KEYS = {"missing", "eps"}
BOOL_KEYS = {"consistent", "curves", "save_images", "figures", "timing", "override", "compare"}


def parse_grid(text, cast=float):
    """Parse ``"0.1,0.2"`` or an inclusive range ``"0.8:2.0:0.1"``."""
    text = str(text).strip()
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError(f"range step must be positive: {text}")
        count = int(round((stop - start) / step)) + 1
        return [cast(round(start + i * step, 10)) for i in range(count)]
    return [cast(t) for t in text.split(",") if t.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


def read_config(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _convert(key, value):
    if value is None:
        return None
    if key in LIST_KEYS:
        cast = int if key in ("m", "n") else float
        return value if isinstance(value, list) else parse_grid(value, cast)
    if key in INT_KEYS:
        return int(value)
    if key in FLOAT_KEYS:
        return float(value)
    if key in BOOL_KEYS:
        return value if isinstance(value, bool) else _bool(value)
    return value


def build_parser():
    p = argparse.ArgumentParser(
        prog="ipg-bench",
        description="Benchmarks for the penalized incremental proximal gradient method.",
    )
    p.add_argument("--config", help="key = value file with defaults for any option")
    p.add_argument("--experiment", choices=["inpaint", "heron"])
    p.add_argument("--solver", choices=["ipg", "pgm", "fista"])
    p.add_argument("--image", help="8-bit binary PGM input image")
    p.add_argument("--missing", help="fraction of erased pixels (default 0.6)")
    p.add_argument("--lambda1", help="l1 weight(s), list or start:stop:step")
    p.add_argument("--lambda2", help="quadratic weight(s)")
    p.add_argument("--a", help="step constant(s): alpha_k = a/k")
    p.add_argument("--b", help="penalty constant(s): beta_k = b k (Heron: b k/||A||^2)")
    p.add_argument("--gamma", help="absolute PGM step(s)")
    p.add_argument("--gamma-factor", dest="gamma_factor", help="PGM step(s) as multiples of 1/L_h")
    p.add_argument("--eps", help="relative-change tolerance; omit for fixed iterations")
    p.add_argument("--iters", help="fixed iteration count, or the cap in tolerance mode")
    p.add_argument("--max-iters", dest="max_iters", help="iteration cap in tolerance mode")
    p.add_argument("--seed", help="base seed for masks and instances")
    p.add_argument("--samples", help="Heron instances per cell (default 10)")
    p.add_argument("--m", help="Heron: number of target balls")
    p.add_argument("--n", help="Heron: dimension")
    p.add_argument("--levels", help="Haar depth (default: maximal)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", help="grid cells run concurrently")
    cons = p.add_mutually_exclusive_group()
    cons.add_argument("--consistent", dest="consistent", action="store_const", const=True)
    cons.add_argument("--inconsistent", dest="consistent", action="store_const", const=False)
    p.add_argument("--compare", action="store_const", const=True,
                   help="inpaint: run all three solvers with their best settings")
    p.add_argument("--curves", action="store_const", const=True, help="write per-iteration CSV per run")
    p.add_argument("--save-images", dest="save_images", action="store_const", const=True)
    p.add_argument("--figures", action="store_const", const=True, help="render PNG figures next to the CSV")
    p.add_argument("--no-timing", dest="timing", action="store_const", const=False,
                   help="leave timing columns blank so outputs are byte-reproducible")
    p.add_argument("--override", action="store_const", const=True,
                   help="run cells that fail the step-size hypotheses")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args):
    """Merge defaults, the config file and explicit flags (in that order)."""
    merged = {}
    if args.config:
        merged.update(read_config(args.config))
    for key, value in vars(args).items():
        if key in ("config", "verbose") or value is None:
            continue
        merged[key] = value
    compare = _convert("compare", merged.pop("compare", False))
    fields = {k: _convert(k, v) for k, v in merged.items()}
    unknown = set(fields) - set(ex.ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ContractError(f"unknown configuration keys: {sorted(unknown)}")
    if fields.get("experiment") == "heron":
        fields.setdefault("a", [0.6])
        fields.setdefault("b", [1.9])
        fields.setdefault("eps", 1e-6)
    return ex.ExperimentConfig(**fields), bool(compare)


def _write_manifest(cfg, out, extra=()):
    lines = cfg.manifest_lines() + list(extra)
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_inpaint(cfg, out):
    table = ex.run_isnr_grid(cfg, out_dir=out)
    stem = f"isnr_{cfg.solver}"
    table.to_csv(out / f"{stem}.csv")
    if len(table.varying()) <= 2:
        table.to_wide_csv(out / f"{stem}_wide.csv")
        if cfg.figures and len(table.varying()) == 2:
            from .plots import plot_table

            plot_table(table, out / f"{stem}.png")
    _write_manifest(cfg, out, [f"runs = {table.runs}"])
    for r in table.rows:
        if r["value"] is not None:
            logger.info("%s: ISNR %.4f dB", r["key"], r["value"])


def _run_compare(cfg, out):
    clean = ex.load_image(cfg.image)
    iters = 50 if cfg.iters is None else cfg.iters
    eps = 1e-6 if cfg.eps is None else cfg.eps
    results = ex.compare_inpainting(clean, cfg.missing, cfg.seed, iters=iters, eps=eps,
                                    max_iters=min(cfg.max_iters, 100_000), levels=cfg.levels)
    sweeps = {}
    for solver, (inst, fixed, tol) in results.items():
        ex.emit_curves(fixed, out / f"curve_{solver}.csv")
        sweeps[solver] = ex.tolerance_sweep(tol)
        ex.write_tolerance_rows(sweeps[solver], out / f"tolerance_{solver}.csv")
        ex.write_pgm(out / f"recon_{solver}.pgm", tol.x.reshape(clean.shape))
        logger.info("%s: ISNR after %d its %.4f dB; at eps=%g %.4f dB (%d its)", solver, iters,
                    ex.final_isnr(inst, fixed), eps, ex.final_isnr(inst, tol), tol.iterations)
    first = next(iter(results.values()))[0]
    ex.write_pgm(out / "observed.pgm", first.observed.reshape(clean.shape))
    if cfg.figures:
        from .plots import plot_images, plot_isnr_curves, plot_tolerance_sweep

        plot_isnr_curves({s: r[1] for s, r in results.items()}, out / "isnr_curves.png")
        plot_tolerance_sweep(sweeps, out / "isnr_tolerance.png")
        panels = {"observed": first.observed}
        panels.update({f"{s} ({ex.final_isnr(r[0], r[2]):.2f} dB)": r[2].x for s, r in results.items()})
        plot_images(panels, clean.shape, out / "reconstructions.png")
    _write_manifest(cfg, out, ["mode = compare"])


def _run_heron(cfg, out):
    table = ex.run_heron_sweep(cfg, out_dir=out)
    stem = "heron_consistent" if cfg.consistent else "heron_inconsistent"
    table.to_csv(out / f"{stem}.csv")
    if len(table.varying()) <= 2:
        table.to_wide_csv(out / f"{stem}_wide.csv")
        if cfg.figures and len(table.varying()) == 2:
            from .plots import plot_table

            plot_table(table, out / f"{stem}.png")
    _write_manifest(cfg, out, [f"runs = {table.runs}"])


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, compare = resolve_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.experiment == "heron":
            _run_heron(cfg, out)
        elif compare:
            _run_compare(cfg, out)
        else:
            _run_inpaint(cfg, out)
    except DivergenceError as exc:
        print(f"ipg-bench: divergence: {exc}", file=sys.stderr)
        return 1
    except (ContractError, ValueError) as exc:
        print(f"ipg-bench: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ipg-bench: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
