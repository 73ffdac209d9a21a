"""Multidimensional DFT on length-n vectors viewed as q-level tensors.

A level order [n0, ..., n_{q-1}] identifies a flat vector of length
n = n0*...*n_{q-1} with a row-major tensor (level 0 slowest). mfft
applies an unnormalized DFT along every axis, realizing the Kronecker
operator F_{n0} x ... x F_{n_{q-1}} with entries exp(+2*pi*i*s*t/n_s)
per factor; mfft_adjoint applies the conjugate transpose. The pair
satisfies mfft_adjoint(mfft(x)) = n * x.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class LevelOrder:
    dims: tuple

    def __init__(self, dims):
        dims = tuple(int(d) for d in dims)
        if len(dims) == 0:
            raise ValidationError("level order needs at least one level")
        if any(d < 1 for d in dims):
            raise ValidationError(f"level sizes must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n(self):
        out = 1
        for d in self.dims:
            out *= d
        return out

    @property
    def q(self):
        return len(self.dims)

    def __repr__(self):
        return f"LevelOrder({list(self.dims)})"


@dataclass
class SpectralVector:
    """Spectrum of a flat vector: complex values plus the order they live on."""

    values: np.ndarray
    order: LevelOrder

    def __post_init__(self):
        if len(self.values) != self.order.n:
            raise DimensionError(
                f"spectral vector has {len(self.values)} entries, order.n = {self.order.n}"
            )


@dataclass
class FftPlan:
    """Reusable workspace for transforms on one fixed level order.

    Keeps a complex input buffer so repeated calls inside the Newton loop
    do not reallocate, and counts transform applications for the
    per-iteration cost assertions.
    """

    order: LevelOrder
    n_forward: int = 0
    n_adjoint: int = 0
    _buf: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._buf is None:
            self._buf = np.empty(self.order.n, dtype=np.complex128)

    def _load(self, x):
        if len(x) != self.order.n:
            raise DimensionError(f"expected length {self.order.n}, got {len(x)}")
        np.copyto(self._buf, x, casting="unsafe")
        return self._buf.reshape(self.order.dims)


def mfft(x, order, plan=None):
    """Apply the forward multilevel DFT, returning a SpectralVector.

    Unnormalized: the DFT along each axis uses exponent +2*pi*i/n_s and
    no 1/n factor, matching the dense Kronecker matrix entrywise.
    """
    if plan is None:
        plan = FftPlan(order)
    elif plan.order.dims != order.dims:
        raise DimensionError("plan was built for a different level order")
    t = plan._load(x)
    # ifftn with norm="forward" is the plain positive-exponent DFT
    out = scipy.fft.ifftn(t, norm="forward", overwrite_x=True)
    plan.n_forward += 1
    return SpectralVector(np.asarray(out).ravel(), order)


def mfft_adjoint(s, plan=None):
    """Apply the conjugate-transpose operator to a SpectralVector."""
    order = s.order
    if plan is None:
        plan = FftPlan(order)
    elif plan.order.dims != order.dims:
        raise DimensionError("plan was built for a different level order")
    t = plan._load(s.values)
    out = scipy.fft.fftn(t, norm="backward", overwrite_x=True)
    plan.n_adjoint += 1
    return np.asarray(out).ravel()


def flat_index(multi, order):
    """Row-major flat index of a multilevel index tuple."""
    if len(multi) != order.q:
        raise DimensionError("multilevel index has wrong number of levels")
    out = 0
    for i, d in zip(multi, order.dims):
        if not 0 <= i < d:
            raise DimensionError(f"index {multi} out of range for {order}")
        out = out * d + i
    return out


def dense_operator(order):
    """Materialize the Kronecker matrix F_{n0} x ... x F_{n_{q-1}}.

    Test oracle only; O(n^2) memory.
    """
    if order.n > 4096:
        raise ValidationError("dense operator capped at n = 4096")
    mat = np.ones((1, 1), dtype=np.complex128)
    for d in order.dims:
        st = np.outer(np.arange(d), np.arange(d))
        f = np.exp(2j * np.pi * st / d)
        mat = np.kron(mat, f)
    return mat
