"""Closed-form proximal maps and projections.

Every prox here has the signature ``prox(x, r, ...)`` and returns the unique
minimizer of ``r * f(u) + 0.5 * ||u - x||**2``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

DIST_GUARD = 1e-14


def _check_step(r):
    if r < 0:
        raise ContractError(f"prox step must be non-negative, got {r}")


def soft_threshold(x, r):
    """Componentwise ``sign(x) * max(|x| - r, 0)``."""
    _check_step(r)
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - r, 0.0)


class IdentityTransform:
    """Trivial orthogonal transform; handy for tests and plain l1 terms."""

    def forward(self, x):
        return np.asarray(x, dtype=np.float64)

    def inverse(self, c):
        return np.asarray(c, dtype=np.float64)


def prox_l1_orthogonal(x, r, W):
    """Prox of ``r * ||W u||_1`` for an orthogonal transform `W`.

    `W` needs ``forward`` and ``inverse`` methods with ``inverse = forward.T``;
    orthogonality makes ``W.T soft_threshold(W x, r)`` exact.
    """
    _check_step(r)
    return W.inverse(soft_threshold(W.forward(x), r))


@dataclass(frozen=True)
class BallSet:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ContractError(f"ball radius must be positive, got {self.radius}")

    def distance(self, x):
        x = _match(x, self)
        return max(float(np.linalg.norm(x - self.center)) - self.radius, 0.0)


def _match(x, C):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != C.center.shape:
        raise ContractError(f"point of shape {x.shape} vs ball in dimension {C.center.size}")
    return x


def project_ball(x, C):
    x = _match(x, C)
    d = x - C.center
    nd = np.linalg.norm(d)
    if nd <= C.radius:
        return x.copy()
    return C.center + (C.radius / nd) * d


def prox_dist_ball(x, r, C):
    """Prox of ``r * dist(., C)`` for a ball `C`.

    Moves `x` a distance `r` toward its projection, stopping at the projection
    when it is closer than `r`.
    """
    _check_step(r)
    x = _match(x, C)
    p = project_ball(x, C)
    d = float(np.linalg.norm(x - p))
    if d < DIST_GUARD:
        return x.copy()
    if d <= r:
        return p
    return x + (r / d) * (p - x)


def prox_scaled_sq_norm(x, r, lam):
    """Prox of ``r * (lam / 2) ||u||**2``, i.e. ``x / (1 + r lam)``."""
    _check_step(r)
    if lam < 0:
        raise ContractError(f"lam must be non-negative, got {lam}")
    return np.asarray(x, dtype=np.float64) / (1.0 + r * lam)
