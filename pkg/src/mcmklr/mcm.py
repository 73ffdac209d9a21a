"""Multilevel circulant matrix (MCM) algebra.

An MCM is fully determined by its level order and first column k. The
Kronecker DFT operator phi diagonalizes it: K = (1/n) phi* diag(v) phi
with eigenvalue vector v = phi k. All products and shifted solves here
run through that identity, so storage is O(n) and work is O(n log n).

Columns built by the lattice folding in kernel.construct_column are
multilevel-symmetric, making v real; the real part is stored and the
discarded imaginary residue is kept as a diagnostic.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import CapExceededError, DimensionError, ValidationError
from .tensor_fft import FftPlan, LevelOrder, SpectralVector, mfft, mfft_adjoint

DENSE_CAP = 4096
SYMMETRY_RESIDUE = 1e-8  # relative imaginary residue above which a column is flagged


@dataclass
class SolveDiagnostics:
    """Accumulates clamp events across solve_shifted calls."""

    clamp_count: int = 0


class MultilevelCirculant:
    """Immutable MCM: level order, first column, cached real eigenvalues."""

    __slots__ = ("order", "first_column", "eigenvalues", "imag_residue", "_plan")

    def __init__(self, order, first_column, eigenvalues, imag_residue=0.0):
        self.order = order
        self.first_column = first_column
        self.eigenvalues = eigenvalues
        self.imag_residue = float(imag_residue)
        self._plan = FftPlan(order)
        for a in (self.first_column, self.eigenvalues):
            a.flags.writeable = False

    @property
    def n(self):
        return self.order.n

    @property
    def symmetry_warning(self):
        """True when the discarded imaginary part was non-negligible."""
        scale = float(np.abs(self.eigenvalues).max()) if self.n else 0.0
        return self.imag_residue > SYMMETRY_RESIDUE * max(scale, 1e-300)

    def payload_floats(self):
        """Stored float payload; exactly 2n for any column length n."""
        return self.first_column.size + self.eigenvalues.size


def from_first_column(k, order, plan=None):
    k = np.ascontiguousarray(k, dtype=np.float64)
    if k.ndim != 1 or len(k) != order.n:
        raise DimensionError(f"column length {k.shape} does not match order.n = {order.n}")
    spec = mfft(k, order, plan)
    v = spec.values
    return MultilevelCirculant(order, k.copy(), np.ascontiguousarray(v.real),
                               imag_residue=float(np.abs(v.imag).max(initial=0.0)))


def matvec(M, x, plan=None):
    """Dense-equivalent product M @ x via one forward and one adjoint mFFT."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) != M.n:
        raise DimensionError(f"matvec length {len(x)} != {M.n}")
    plan = plan if plan is not None else M._plan
    s = mfft(x, M.order, plan)
    s.values *= M.eigenvalues
    return mfft_adjoint(s, plan).real / M.n


def solve_shifted(M, shift, b, counters=None, plan=None):
    """Solve (M + shift*I) x = b by spectral division.

    shift must be positive. Near-zero shifted eigenvalues are clamped to
    +/- floor with floor = 1e-12 * (max|v| + shift); the number of
    clamped denominators is added to counters.clamp_count when a
    SolveDiagnostics is passed. Clamping degrades the residual instead
    of failing hard.
    """
    if shift <= 0:
        raise ValidationError(f"shift must be positive, got {shift}")
    b = np.asarray(b, dtype=np.float64)
    if len(b) != M.n:
        raise DimensionError(f"solve length {len(b)} != {M.n}")
    plan = plan if plan is not None else M._plan
    s = mfft(b, M.order, plan)
    floor = 1e-12 * (float(np.abs(M.eigenvalues).max(initial=0.0)) + shift)
    quot, n_clamped = backend.spectral_shifted_divide(s.values, M.eigenvalues, float(shift), floor)
    if counters is not None:
        counters.clamp_count += n_clamped
    return mfft_adjoint(SpectralVector(quot, M.order), plan).real / M.n


def add(A, B):
    if A.order.dims != B.order.dims:
        raise DimensionError(f"level orders differ: {A.order} vs {B.order}")
    return MultilevelCirculant(
        A.order,
        A.first_column + B.first_column,
        A.eigenvalues + B.eigenvalues,
        imag_residue=A.imag_residue + B.imag_residue,
    )


def scale(A, c):
    c = float(c)
    return MultilevelCirculant(
        A.order, c * A.first_column, c * A.eigenvalues, imag_residue=abs(c) * A.imag_residue
    )


def identity(order):
    """The identity matrix as an MCM (k = e0, all eigenvalues 1)."""
    k = np.zeros(order.n)
    k[0] = 1.0
    return MultilevelCirculant(order, k, np.ones(order.n), imag_residue=0.0)


def to_dense(M, cap=DENSE_CAP):
    """Ground-truth materialization by the multilevel index formula.

    Entry (i, j) = k at multilevel index ((i_s - j_s) mod n_s). Capped:
    this exists for test oracles, not for production paths.
    """
    n = M.n
    if n > cap:
        raise CapExceededError(f"to_dense refused: n = {n} exceeds cap {cap}")
    dims = M.order.dims
    idx = np.arange(n)
    multi = np.unravel_index(idx, dims)
    flat = np.zeros((n, n), dtype=np.int64)
    for s, d in enumerate(dims):
        diff = (multi[s][:, None] - multi[s][None, :]) % d
        flat = flat * d + diff
    return M.first_column[flat]
