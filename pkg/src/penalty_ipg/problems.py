"""Benchmark problem builders: wavelet inpainting and generalized Heron.

Both return :class:`ProblemInstance` subclasses ready for :func:`solve`.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .baselines import CompositeProblem
from .errors import ContractError
from .haar import HaarTransform
from .linalg import DiagonalMask, make_rng, operator_norm, smallest_positive_eigenvalue
from .prox import BallSet, prox_dist_ball, prox_l1_orthogonal
from .solver import ObjectiveTerm, PenaltyFunction, ProblemInstance, StepSchedule

logger = logging.getLogger(__name__)

HERON_RADIUS = 0.2
ORACLE_MAX_COND = 1e12


@dataclass(kw_only=True)
class InpaintingInstance(ProblemInstance):
    clean: Optional[np.ndarray]
    mask: DiagonalMask
    observed: np.ndarray
    lambda1: float
    lambda2: float
    transform: HaarTransform
    missing_fraction: float
    seed: int
    shape: tuple = (0, 0)

    def schedule(self, a=1.1, b=1.8):
        return StepSchedule(a, b)

    def sparsity(self, x):
        """``lambda1 ||W x||_1 + (lambda2/2) ||x||^2``, the upper-level objective."""
        return self.lambda1 * float(np.abs(self.transform.forward(x)).sum()) + 0.5 * self.lambda2 * float(x @ x)

    def manifest(self):
        return {
            "experiment": "inpaint",
            "height": self.shape[0],
            "width": self.shape[1],
            "missing_fraction": self.missing_fraction,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "levels": self.transform.levels,
            "seed": self.seed,
            "masked_pixels": int(self.mask.size - self.mask.observed.sum()),
        }


@dataclass(kw_only=True)
class HeronInstance(ProblemInstance):
    balls: list
    A: np.ndarray
    b: np.ndarray
    norm_A: float
    consistent: bool
    seed: int
    oracle_flag: str = "ok"

    @property
    def m(self):
        return len(self.balls)

    def schedule(self, a=0.6, b=1.9):
        """Step ``a/k`` and penalty ``b k / ||A||^2``."""
        return StepSchedule(a, b, beta_scale=1.0 / self.norm_A**2)

    def manifest(self):
        return {
            "experiment": "heron",
            "m": self.m,
            "n": self.dim,
            "consistent": self.consistent,
            "seed": self.seed,
            "norm_A": self.norm_A,
            "oracle": self.oracle_flag,
        }


def _l1_prox(lam, W):
    def prox(v, r):
        return prox_l1_orthogonal(v, r * lam, W)

    return prox


def build_inpainting(clean, missing_fraction=0.6, lambda1=1.0, lambda2=1e-4, seed=0, levels=None):
    """Inpainting instance with ``floor(missing_fraction * n)`` pixels erased.

    The upper level is ``lambda1 ||W x||_1 + (lambda2/2)||x||^2`` (one term,
    prox on the l1 part, gradient on the quadratic) and the penalty is
    ``g = 0.5 ||B x - b||^2``, whose minimizers are the images agreeing with
    the observed pixels. The start point is the observed image.
    """
    clean = np.asarray(clean, dtype=np.float64)
    if clean.ndim != 2:
        raise ContractError(f"clean image must be 2-D, got shape {clean.shape}")
    if not 0 < missing_fraction < 1:
        raise ContractError(f"missing fraction must lie in (0, 1), got {missing_fraction}")
    if not (lambda1 > 0 and lambda2 > 0):
        raise ContractError("lambda1 and lambda2 must be positive")
    n = clean.size
    count = int(np.floor(missing_fraction * n))
    if count == 0 or count == n:
        raise ContractError(f"masking {count} of {n} pixels is degenerate")
    W = HaarTransform(clean.shape, levels)
    rng = make_rng(seed)
    diag = np.ones(n)
    diag[rng.permutation(n)[:count]] = 0.0
    mask = DiagonalMask(diag)
    x_clean = clean.ravel().copy()
    observed = mask(x_clean)
    d = mask.diagonal

    def g_value(x):
        r = d * x - observed
        return 0.5 * float(r @ r)

    def g_grad(x):
        return d * x - observed

    term = ObjectiveTerm(
        prox_f=_l1_prox(lambda1, W),
        grad_h=lambda x: lambda2 * x,
        L=lambda2,
        value_f=lambda x: lambda1 * float(np.abs(W.forward(x)).sum()),
        value_h=lambda x: 0.5 * lambda2 * float(x @ x),
    )
    penalty = PenaltyFunction(value=g_value, grad=g_grad, L=1.0, min_value=0.0, growth_constant=1.0)
    return InpaintingInstance(
        terms=[term],
        penalty=penalty,
        x0=observed.copy(),
        info={"experiment": "inpaint"},
        clean=x_clean,
        mask=mask,
        observed=observed,
        lambda1=lambda1,
        lambda2=lambda2,
        transform=W,
        missing_fraction=missing_fraction,
        seed=seed,
        shape=clean.shape,
    )


def traditional_composite(inst):
    """Unconstrained form ``lambda1||Wx||_1 + (lambda2/2)||x||^2 + 0.5||Bx - b||^2``.

    The monitored pair is the upper-level objective and the data misfit, as
    for the penalized solver.
    """
    W, lam1, lam2 = inst.transform, inst.lambda1, inst.lambda2
    d, obs = inst.mask.diagonal, inst.observed

    def grad_h(x):
        return lam2 * x + d * x - obs

    def value_h(x):
        r = d * x - obs
        return 0.5 * lam2 * float(x @ x) + 0.5 * float(r @ r)

    return CompositeProblem(
        prox_f=_l1_prox(lam1, W),
        grad_h=grad_h,
        L_h=lam2 + 1.0,
        value_f=lambda x: lam1 * float(np.abs(W.forward(x)).sum()),
        value_h=value_h,
        split=lambda x: (inst.sparsity(x), inst.penalty.value(x)),
    )


def isnr(clean, noisy, current):
    """Improvement in SNR, ``10 log10(||x - b||^2 / ||x - x_k||^2)`` in dB.

    Returns ``inf`` when `current` equals `clean` and 0 when `noisy` does.
    """
    clean = np.asarray(clean, dtype=np.float64)
    noisy = np.asarray(noisy, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    if not clean.shape == noisy.shape == current.shape:
        raise ContractError(f"shape mismatch: {clean.shape}, {noisy.shape}, {current.shape}")
    den = float(np.sum((clean - current) ** 2))
    if den == 0.0:
        return float("inf")
    num = float(np.sum((clean - noisy) ** 2))
    if num == 0.0:
        return 0.0
    return 10.0 * np.log10(num / den)


def inpainting_oracle(inst, iters=1_000_000, tol=1e-12, return_info=False):
    """Reference solution of the constrained inpainting problem.

    Douglas-Rachford splitting between the exact projection onto
    ``{x : B x = b}`` (observed pixels pinned, masked ones free) and the
    closed-form prox of ``lambda1||W.||_1 + (lambda2/2)||.||^2``. Independent of
    the penalty schedule; meant for small images.
    """
    if inst.dim > 64:
        logger.warning("inpainting oracle on %d pixels may be slow", inst.dim)
    W, lam1, lam2 = inst.transform, inst.lambda1, inst.lambda2
    obs_idx = inst.mask.observed
    pinned = inst.observed[obs_idx]

    def project(z):
        x = z.copy()
        x[obs_idx] = pinned
        return x

    shrink = 1.0 / (1.0 + lam2)
    # dense synthesis matrix: columns are W.T e_j; cheap for small images
    Wt = np.stack([W.inverse(e) for e in np.eye(inst.dim)], axis=1)
    Wf = Wt.T
    thresh = lam1 * shrink

    def prox(v):
        c = Wf @ (v * shrink)
        return Wt @ (np.sign(c) * np.maximum(np.abs(c) - thresh, 0.0))

    z = inst.observed.copy()
    used = iters
    for it in range(1, iters + 1):
        x = project(z)
        y = prox(2.0 * x - z)
        step = y - x
        z = z + step
        if float(np.linalg.norm(step)) <= tol:
            used = it
            break
    out = project(z)
    if used == iters and float(np.linalg.norm(step)) > tol:
        logger.warning("inpainting oracle stopped at %d iterations with residual %.3g > %g",
                       iters, float(np.linalg.norm(step)), tol)
    if return_info:
        return out, {"iterations": used, "residual": float(np.linalg.norm(step))}
    return out


def build_heron(m, n, consistent=True, seed=0):
    """Random generalized Heron instance.

    Balls of radius 0.2 with centers drawn from ``(-n^2, n^2)``, a
    ``m^2 x n`` matrix with entries from the same interval, ``b = 0`` when
    consistent and entries from ``(0, 1)`` otherwise, and a start point drawn
    like the centers. Each term is ``dist(., C_i) + ||.||^2 / (2m)``; the
    penalty is ``0.5 ||A x - b||^2`` with ``L_g = ||A||^2``. The
    least-squares point from the normal equations is attached as oracle
    unless ``A.T A`` is too ill-conditioned.
    """
    if m < 1 or n < 1:
        raise ContractError("m and n must be positive")
    rng = make_rng(seed)
    span = float(n * n)
    centers = rng.uniform(-span, span, size=(m, n))
    A = rng.uniform(-span, span, size=(m * m, n))
    b = np.zeros(m * m) if consistent else rng.uniform(0.0, 1.0, size=m * m)
    x1 = rng.uniform(-span, span, size=n)
    balls = [BallSet(c, HERON_RADIUS) for c in centers]
    norm_A = operator_norm(A)
    G = A.T @ A
    oracle, flag = None, "ok"
    if np.linalg.cond(G) < ORACLE_MAX_COND:
        oracle = np.linalg.solve(G, A.T @ b)
    else:
        flag = "omitted: singular normal equations"
        logger.warning("Heron instance seed=%d: %s", seed, flag)
    try:
        growth = smallest_positive_eigenvalue(G)
    except Exception:
        growth = None

    def g_value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def g_grad(x):
        return A.T @ (A @ x - b)

    min_value = g_value(oracle) if oracle is not None else 0.0
    terms = [_heron_term(C, m) for C in balls]
    penalty = PenaltyFunction(
        value=g_value, grad=g_grad, L=norm_A**2, min_value=min_value, growth_constant=growth
    )
    return HeronInstance(
        terms=terms,
        penalty=penalty,
        x0=x1,
        oracle=oracle,
        info={"experiment": "heron"},
        balls=balls,
        A=A,
        b=b,
        norm_A=norm_A,
        consistent=consistent,
        seed=seed,
        oracle_flag=flag,
    )


def _heron_term(C, m):
    return ObjectiveTerm(
        prox_f=lambda v, r: prox_dist_ball(v, r, C),
        grad_h=lambda x: x / m,
        L=1.0 / m,
        value_f=C.distance,
        value_h=lambda x: float(x @ x) / (2.0 * m),
    )


def write_instance_manifest(inst, path=None, image=None):
    """Plain-text ``key = value`` description sufficient to rebuild `inst`.

    For inpainting instances pass the source `image` path so that
    :func:`rebuild_instance` can reload the pixels; derived quantities
    (``norm_A``, ``masked_pixels``) are recorded for cross-checking only.
    """
    fields = dict(inst.manifest())
    if image is not None:
        fields["image"] = str(image)
    text = "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in fields.items())
    if path is None:
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def read_instance_manifest(source):
    """Parse a manifest written by :func:`write_instance_manifest` (path or text)."""
    text = source
    if "\n" not in str(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _parse_value(value)
    return out


def _parse_value(v):
    if v in ("True", "False"):
        return v == "True"
    if v == "None":
        return None
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def rebuild_instance(manifest, clean=None):
    """Regenerate the instance described by `manifest` bit for bit.

    Inpainting needs the clean image, either passed directly or through the
    manifest's ``image`` path.
    """
    if isinstance(manifest, str):
        manifest = read_instance_manifest(manifest)
    kind = manifest.get("experiment")
    if kind == "heron":
        return build_heron(manifest["m"], manifest["n"], manifest["consistent"], manifest["seed"])
    if kind != "inpaint":
        raise ContractError(f"unknown experiment in manifest: {kind!r}")
    if clean is None:
        if "image" not in manifest:
            raise ContractError("inpainting manifest has no image path; pass `clean`")
        from .imageio import read_pgm

        clean = read_pgm(manifest["image"])
    clean = np.asarray(clean, dtype=np.float64)
    if clean.shape != (manifest["height"], manifest["width"]):
        raise ContractError(f"image shape {clean.shape} does not match the manifest")
    return build_inpainting(
        clean,
        manifest["missing_fraction"],
        manifest["lambda1"],
        manifest["lambda2"],
        manifest["seed"],
        manifest["levels"],
    )
