"""Matplotlib renderings of benchmark outputs, written next to the CSV files."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LABELS = {"ipg": "IPG + penalty", "pgm": "PGM", "fista": "FISTA"}
STYLES = {"ipg": "-", "pgm": "--", "fista": "-."}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_isnr_curves(reports, path):
    """ISNR against iteration for several solvers; `reports` maps solver -> report."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for name, rep in reports.items():
        k = [r.k for r in rep.trace]
        v = [r.extra.get("isnr", np.nan) for r in rep.trace]
        ax.plot(k, v, STYLES.get(name, "-"), label=LABELS.get(name, name))
    ax.set_xlabel("iteration")
    ax.set_ylabel("ISNR (dB)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def plot_tolerance_sweep(rows_by_solver, path):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for name, rows in rows_by_solver.items():
        eps = [r["eps"] for r in rows if r["isnr"] is not None]
        val = [r["isnr"] for r in rows if r["isnr"] is not None]
        ax.semilogx(eps, val, STYLES.get(name, "-"), marker="o", label=LABELS.get(name, name))
    ax.invert_xaxis()
    ax.set_xlabel("optimality tolerance")
    ax.set_ylabel("ISNR (dB)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def plot_images(images, shape, path):
    """Side-by-side grayscale panels; `images` maps title -> vector."""
    fig, axes = plt.subplots(1, len(images), figsize=(3.2 * len(images), 3.2 * shape[0] / shape[1] + 0.6))
    axes = np.atleast_1d(axes)
    for ax, (title, vec) in zip(axes, images.items()):
        ax.imshow(np.clip(np.asarray(vec).reshape(shape), 0, 1), cmap="gray", vmin=0, vmax=1)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    return _finish(fig, path)


def plot_table(table, path):
    """Heat map of a two-parameter result table; blank cells show as gaps."""
    vary = table.varying()
    rest = [p for p in table.params if p not in vary]
    col_param, row_param = (vary + rest)[:2]
    cols = sorted({r["key"][col_param] for r in table.rows})
    rows = sorted({r["key"][row_param] for r in table.rows})
    grid = np.full((len(rows), len(cols)), np.nan)
    for r in table.rows:
        if r["value"] is not None:
            grid[rows.index(r["key"][row_param]), cols.index(r["key"][col_param])] = r["value"]
    fig, ax = plt.subplots(figsize=(1.0 + 0.55 * len(cols), 1.0 + 0.4 * len(rows)))
    im = ax.imshow(grid, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(cols)), [f"{c:g}" for c in cols], fontsize=7)
    ax.set_yticks(range(len(rows)), [f"{r:g}" for r in rows], fontsize=7)
    ax.set_xlabel(col_param)
    ax.set_ylabel(row_param)
    fig.colorbar(im, ax=ax, label=table.metric)
    return _finish(fig, path)


def plot_penalty_trace(report, path):
    """Penalty value and inner displacement per iteration on log axes."""
    k = [r.k for r in report.trace]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogy(k, [max(r.g, 1e-300) for r in report.trace], label="g(x_k)")
    disp = [r.inner_disp_sq for r in report.trace]
    if all(d is not None for d in disp):
        ax.semilogy(k, np.maximum(disp, 1e-300), "--", label="inner displacement")
    ax.set_xlabel("iteration")
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, path)
