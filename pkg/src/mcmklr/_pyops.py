"""NumPy reference implementations of the hot inner kernels.

The compiled module _fastops mirrors this file function for function;
backend.py picks one at import time. Keep semantics identical: the
equivalence test suite compares the two on random inputs.
"""

import numpy as np

P_CLAMP = 1e-15  # probability floor/ceiling keeping logs finite


def _sigmoid(z):
    # overflow-safe: never exponentiate a large positive argument
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def probs_and_logloss(z, y, mask):
    """Fused pass: probabilities from scores plus the masked log-loss sum.

    Returns (p, loss_sum) with p clamped to [P_CLAMP, 1 - P_CLAMP] and
    loss_sum = -sum_i mask_i * (y_i ln p_i + (1 - y_i) ln(1 - p_i)).
    """
    p = np.clip(_sigmoid(z), P_CLAMP, 1.0 - P_CLAMP)
    loss = -float(np.dot(mask * y, np.log(p)) + np.dot(mask * (1.0 - y), np.log1p(-p)))
    return p, loss


def trial_logloss(z, dz, r, y, mask):
    """Masked log-loss sum at scores z + r*dz, without keeping p."""
    p = np.clip(_sigmoid(z + r * dz), P_CLAMP, 1.0 - P_CLAMP)
    return -float(np.dot(mask * y, np.log(p)) + np.dot(mask * (1.0 - y), np.log1p(-p)))


def tau_sum(p, mask):
    """Sum of masked IRLS weights p_i(1 - p_i)."""
    return float(np.dot(mask, p * (1.0 - p)))


def spectral_shifted_divide(num, v, shift, floor):
    """Divide a spectrum by (v + shift) with a signed denominator clamp.

    Denominators with |v_j + shift| < floor are replaced by +/-floor
    (sign preserved, exact zeros go to +floor). Returns (out, n_clamped).
    """
    den = v + shift
    small = np.abs(den) < floor
    n_clamped = int(np.count_nonzero(small))
    if n_clamped:
        den = den.copy()
        den[small] = np.where(den[small] < 0, -floor, floor)
    return num / den, n_clamped


def exp_vote(sqd, sigma, alpha):
    """Gaussian-kernel vote for one block of squared distances.

    sqd is (b, m) row-block of squared distances to the m training
    points; returns the length-b vector exp(-sigma*sqd) @ alpha.
    """
    return np.exp(-sigma * sqd) @ alpha
