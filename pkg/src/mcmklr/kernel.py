"""Radial kernels and the lattice construction of the MCM first column.

The approximating column is built on a synthetic q-dimensional integer
lattice with steps h: evaluate the radial profile at every lattice
point (lattice_values), then fold index pairs {i_s, n_s - i_s} axis by
axis so the column becomes multilevel-symmetric (construct_column).
The folding keeps every lattice value in exactly one output slot, so
the column sum equals the lattice sum.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, DimensionError, ValidationError
from .tensor_fft import LevelOrder


@dataclass(frozen=True)
class RadialKernel:
    """Radial profile g(r). Only the Gaussian g(r) = exp(-sigma r^2) is provided."""

    sigma: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")

    def profile(self, r):
        return np.exp(-self.sigma * np.square(r))

    def profile_sq(self, r2):
        """g evaluated on squared radii (the common case everywhere here)."""
        return np.exp(-self.sigma * np.asarray(r2, dtype=np.float64))


@dataclass(frozen=True)
class GridSpec:
    """Lattice steps h_s, one per level of the order."""

    h: tuple
    order: LevelOrder

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if len(h) != self.order.q:
            raise DimensionError(f"{len(h)} steps for a {self.order.q}-level order")
        if any(v <= 0 for v in h):
            raise ValidationError(f"lattice steps must be positive, got {h}")
        object.__setattr__(self, "h", h)

    @classmethod
    def unit(cls, order):
        return cls((1.0,) * order.q, order)


def lattice_values(kern, grid):
    """Profile values t on the lattice: t(i) = g(||(i_s * h_s)_s||)."""
    dims = grid.order.dims
    r2 = np.zeros(dims)
    for s, (d, hs) in enumerate(zip(dims, grid.h)):
        shape = [1] * len(dims)
        shape[s] = d
        r2 = r2 + (np.arange(d) * hs).reshape(shape) ** 2
    return kern.profile_sq(r2).ravel()


def construct_column(kern, grid):
    """Fold lattice values into a multilevel-symmetric MCM first column.

    Per level, index i_s collects the value set {i_s, n_s - i_s}
    (a single element when i_s = 0 or at an even midpoint where the two
    coincide); the full column entry sums the Cartesian product of those
    sets. Implemented as one reversal-add pass per axis.
    """
    dims = grid.order.dims
    a = lattice_values(kern, grid).reshape(dims)
    for ax, d in enumerate(dims):
        idx = np.arange(d)
        rev = (-idx) % d
        folded = a + np.take(a, rev, axis=ax)
        single = idx == rev  # i_s = 0 and the even midpoint: count once
        sl = [slice(None)] * len(dims)
        sl[ax] = single
        folded[tuple(sl)] = np.take(a, idx[single], axis=ax)
        a = folded
    return a.ravel()


def pairwise_sq_dists(A, B):
    """Squared Euclidean distances, (len(A), len(B)), clipped at zero."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError(f"incompatible shapes {A.shape} and {B.shape}")
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def exact_gram(kern, X, cap=4096):
    """Full Gram matrix K_ij = g(||x_i - x_j||). Capped; oracle/baseline use."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) > cap:
        raise CapExceededError(f"exact_gram refused: n = {len(X)} exceeds cap {cap}")
    return kern.profile_sq(pairwise_sq_dists(X, X))


def gram_row_blocks(kern, Q, X, block=512):
    """Stream the Gram rows of query points Q against X, block rows at a time."""
    Q = np.asarray(Q, dtype=np.float64)
    for lo in range(0, len(Q), block):
        yield lo, kern.profile_sq(pairwise_sq_dists(Q[lo : lo + block], X))


_SMOOTH_PRIMES = (2, 3, 5, 7)


def _is_smooth(x):
    for p in _SMOOTH_PRIMES:
        while x % p == 0:
            x //= p
    return x == 1


def _next_smooth(x):
    while not _is_smooth(x):
        x += 1
    return x


def choose_level_order(m, q=3):
    """Level order for m samples: q near-equal factors with product >= m.

    Starts from the q-th root rounded up, then greedily shrinks trailing
    factors while the product stays >= m. Factor sizes are kept
    7-smooth so every axis FFT runs at mixed-radix speed; the padding
    this costs is a few percent.
    """
    if m < 1:
        raise ValidationError(f"need at least one sample, got {m}")
    if q < 1:
        raise ValidationError(f"level count must be >= 1, got {q}")
    base = max(int(round(m ** (1.0 / q))), 1)
    while base**q < m:
        base += 1
    while base > 1 and (base - 1) ** q >= m:
        base -= 1
    dims = [_next_smooth(base)] * q
    for s in reversed(range(q)):
        while dims[s] > 1:
            cand = dims[s] - 1
            while cand > 1 and not _is_smooth(cand):
                cand -= 1
            rest = math.prod(dims[:s] + dims[s + 1 :])
            if cand >= 1 and cand * rest >= m:
                dims[s] = cand
            else:
                break
    return LevelOrder(dims)
