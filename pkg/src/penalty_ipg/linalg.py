"""Dense linear algebra helpers shared by the solvers and the benchmarks."""

import logging

import numpy as np

from .errors import ContractError, EstimateUnconvergedError, NoPositiveEigenvalueError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
RANK_RTOL = 1e-10


def as_vector(x, name="x"):
    """Return `x` as a finite 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractError(f"{name} has non-finite entries")
    return v


def as_matrix(A, name="A"):
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ContractError(f"{name} must be two-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractError(f"{name} has non-finite entries")
    return M


def apply(A, x):
    """Dense product ``A @ x`` with a dimension check."""
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if A.ndim != 2 or x.shape != (A.shape[1],):
        raise ContractError(f"cannot apply {A.shape} matrix to vector of shape {x.shape}")
    return A @ x


def apply_transpose(A, y):
    """Dense product ``A.T @ y`` with a dimension check."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise ContractError(f"cannot apply transpose of {A.shape} matrix to shape {y.shape}")
    return A.T @ y


class DiagonalMask:
    """Diagonal 0/1 operator (the observation operator of inpainting).

    Parameters
    ----------
    diagonal : array_like
        Flags, each exactly 0 or 1. A 1 marks an observed entry.
    """

    def __init__(self, diagonal):
        d = np.asarray(diagonal, dtype=np.float64).ravel()
        if not np.all((d == 0.0) | (d == 1.0)):
            raise ContractError("mask entries must be exactly 0 or 1")
        d.setflags(write=False)
        self._diag = d

    @property
    def diagonal(self):
        return self._diag

    @property
    def size(self):
        return self._diag.size

    @property
    def observed(self):
        return self._diag == 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self._diag.shape:
            raise ContractError(f"mask of length {self.size} applied to shape {x.shape}")
        return self._diag * x

    def __matmul__(self, x):
        return self(x)


def make_rng(seed):
    """Seeded PCG64 generator; equal seeds give equal streams on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


def _power_iteration(A, v, tol, max_iter):
    lam_old = None
    lam = 0.0
    for _ in range(max_iter):
        Av = A @ v
        lam = float(Av @ Av)
        if lam == 0.0:
            return 0.0, True
        if lam_old is not None and abs(lam - lam_old) <= tol * lam:
            return lam, True
        lam_old = lam
        w = A.T @ Av
        v = w / np.linalg.norm(w)
    return lam, False


def operator_norm(A, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Largest singular value of `A` by power iteration on ``A.T @ A``.

    The iteration runs from two deterministic starts, the normalized all-ones
    vector and the basis vector of the largest column of `A`, and keeps the
    larger estimate, so repeated calls return bit-identical values and a start
    that happens to be a lower singular vector does not go unnoticed. Starts
    in the null space of `A` are skipped.

    Raises
    ------
    EstimateUnconvergedError
        If the Rayleigh quotient has not settled to relative `tol` within
        `max_iter` iterations. The unconverged estimate is attached.
    """
    A = as_matrix(A)
    if tol <= 0:
        raise ContractError("tol must be positive")
    if not np.any(A):
        raise ContractError("operator_norm of the zero matrix is not estimated")
    n = A.shape[1]
    starts = [np.full(n, 1.0 / np.sqrt(n)), np.eye(n)[int(np.argmax(np.sum(A * A, axis=0)))]]
    best = 0.0
    for v0 in starts:
        lam, ok = _power_iteration(A, v0, tol, max_iter)
        if lam == 0.0:
            continue
        if not ok:
            raise EstimateUnconvergedError(
                f"power iteration did not converge in {max_iter} iterations", np.sqrt(lam)
            )
        best = max(best, lam)
    return float(np.sqrt(best))


def smallest_positive_eigenvalue(G, tol=RANK_RTOL):
    """Smallest eigenvalue of a symmetric PSD matrix above ``tol * max eigenvalue``."""
    G = as_matrix(G, "G")
    if G.shape[0] != G.shape[1]:
        raise ContractError(f"G must be square, got {G.shape}")
    scale = max(np.abs(G).max(), 1.0)
    if np.abs(G - G.T).max() > 1e-12 * scale:
        raise ContractError("G must be symmetric")
    w = np.linalg.eigvalsh(G)
    top = w[-1]
    if top <= 0.0:
        raise NoPositiveEigenvalueError("G has no positive eigenvalue")
    positive = w[w > tol * top]
    return float(positive[0])
