"""Orthonormal multilevel 2-D Haar transform on vectorized images.

Coefficient layout (flattened, each block row-major)::

    [LL_L, LH_L, HL_L, HH_L, LH_{L-1}, HL_{L-1}, HH_{L-1}, ..., LH_1, HL_1, HH_1]

Level 1 is the finest. The first letter of a band names the filter applied
along rows of the image (axis 0), the second the filter along columns.
"""

import logging

import numpy as np

from .errors import ContractError

logger = logging.getLogger(__name__)

_S = 1.0 / np.sqrt(2.0)


def _two_adic(v):
    k = 0
    while v % 2 == 0 and v > 0:
        v //= 2
        k += 1
    return k


def max_levels(l1, l2):
    """Largest L such that 2**L divides both image dimensions."""
    if l1 < 2 or l2 < 2:
        raise ContractError("image dimensions must be at least 2")
    return min(_two_adic(l1), _two_adic(l2))


def _analysis(a):
    lo = (a[0::2] + a[1::2]) * _S
    hi = (a[0::2] - a[1::2]) * _S
    ll = (lo[:, 0::2] + lo[:, 1::2]) * _S
    lh = (lo[:, 0::2] - lo[:, 1::2]) * _S
    hl = (hi[:, 0::2] + hi[:, 1::2]) * _S
    hh = (hi[:, 0::2] - hi[:, 1::2]) * _S
    return ll, lh, hl, hh


def _synthesis(ll, lh, hl, hh):
    h, w = ll.shape
    lo = np.empty((h, 2 * w))
    hi = np.empty((h, 2 * w))
    lo[:, 0::2] = (ll + lh) * _S
    lo[:, 1::2] = (ll - lh) * _S
    hi[:, 0::2] = (hl + hh) * _S
    hi[:, 1::2] = (hl - hh) * _S
    a = np.empty((2 * h, 2 * w))
    a[0::2] = (lo + hi) * _S
    a[1::2] = (lo - hi) * _S
    return a


class HaarTransform:
    """Haar wavelet analysis (``forward``) and synthesis (``inverse``).

    Parameters
    ----------
    shape : tuple of int
        Image height and width.
    levels : int, optional
        Decomposition depth. Defaults to ``max_levels(*shape)``. A depth the
        dimensions cannot support is lowered to the maximum with a warning.
    """

    def __init__(self, shape, levels=None):
        l1, l2 = (int(s) for s in shape)
        top = max_levels(l1, l2)
        if top < 1:
            raise ContractError(f"image {l1}x{l2} is not divisible by 2; no Haar level fits")
        if levels is None:
            levels = top
        elif levels < 1:
            raise ContractError(f"levels must be >= 1, got {levels}")
        elif levels > top:
            logger.warning("Haar depth %d does not fit a %dx%d image; using %d", levels, l1, l2, top)
            levels = top
        self.shape = (l1, l2)
        self.levels = int(levels)
        self.size = l1 * l2
        # band sizes from coarsest to finest, used to slice coefficient vectors
        self._dims = [(l1 >> j, l2 >> j) for j in range(1, self.levels + 1)][::-1]
        probe = np.cos(np.arange(self.size, dtype=np.float64))
        if not np.allclose(self.inverse(self.forward(probe)), probe, rtol=0, atol=1e-10):
            raise ContractError("Haar round trip failed")

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.size,):
            raise ContractError(f"expected vector of length {self.size}, got shape {x.shape}")
        return x

    def forward(self, x):
        a = self._check(x).reshape(self.shape)
        details = []
        for _ in range(self.levels):
            a, lh, hl, hh = _analysis(a)
            details.append((lh, hl, hh))
        parts = [a.ravel()]
        for lh, hl, hh in reversed(details):
            parts.extend((lh.ravel(), hl.ravel(), hh.ravel()))
        return np.concatenate(parts)

    def inverse(self, c):
        c = self._check(c)
        h, w = self._dims[0]
        pos = h * w
        a = c[:pos].reshape(h, w)
        for h, w in self._dims:
            k = h * w
            lh = c[pos:pos + k].reshape(h, w)
            hl = c[pos + k:pos + 2 * k].reshape(h, w)
            hh = c[pos + 2 * k:pos + 3 * k].reshape(h, w)
            pos += 3 * k
            a = _synthesis(a, lh, hl, hh)
        return a.ravel()

    def __repr__(self):
        return f"HaarTransform(shape={self.shape}, levels={self.levels})"
