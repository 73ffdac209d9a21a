"""Exact Newton baseline on the dense kernel matrix.

No approximation anywhere: the full Gram matrix, the true gradient
lam*K*alpha - (1/n)K(y - p), and the simplified Newton system

    (Lambda K + n*lam*I) d = y - p - n*lam*alpha

solved by dense LU, cubic work per iteration. Serves as the accuracy
reference the fast solver is compared against and as the equivalence
oracle for small instances. Capped at n = 4096.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import backend
from .errors import CapExceededError, NumericalError, ValidationError
from .kernel import exact_gram
from .klr_fast import BinaryModel, _check_binary_labels

DENSE_CAP = 4096


@dataclass
class DenseProblem:
    K: np.ndarray
    y: np.ndarray
    lambda_: float

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        n = len(self.y)
        if self.K.shape != (n, n):
            raise ValidationError(f"K has shape {self.K.shape} for {n} labels")
        if n > DENSE_CAP:
            raise CapExceededError(f"dense problem size {n} exceeds cap {DENSE_CAP}")
        if not self.lambda_ > 0:
            raise ValidationError("lambda must be positive")

    @property
    def n(self):
        return len(self.y)


def _probs(z):
    p, _ = backend.probs_and_logloss(z, np.zeros_like(z), np.zeros_like(z))
    return p


def exact_objective(prob, alpha):
    z = prob.K @ alpha
    ones = np.ones_like(z)
    _, loss = backend.probs_and_logloss(z, prob.y, ones)
    return 0.5 * prob.lambda_ * float(alpha @ z) + loss / prob.n


def exact_gradient(prob, alpha):
    """lam*K*alpha - (1/n) K (y - p) with p = sigmoid(K alpha)."""
    p = _probs(prob.K @ alpha)
    return prob.lambda_ * (prob.K @ alpha) - (prob.K @ (prob.y - p)) / prob.n


def exact_hessian(prob, alpha):
    """(1/n) K^T Lambda K + lam K, Lambda = diag(p(1-p))."""
    p = _probs(prob.K @ alpha)
    lam_w = p * (1.0 - p)
    return (prob.K.T * lam_w) @ prob.K / prob.n + prob.lambda_ * prob.K


def exact_newton_direction(prob, alpha, p, simplified=True):
    """Newton direction from the simplified system, or the raw one.

    simplified=True solves (Lambda K + n lam I) d = y - p - n lam alpha.
    simplified=False solves the unreduced system H d = -grad with the
    exact Hessian; both agree for positive-definite K and exist so the
    equivalence can be asserted in tests.
    """
    n, lam, K = prob.n, prob.lambda_, prob.K
    lam_w = p * (1.0 - p)
    if simplified:
        A = lam_w[:, None] * K + n * lam * np.eye(n)
        b = prob.y - p - n * lam * alpha
    else:
        A = (K.T * lam_w) @ K / n + lam * K
        b = -(lam * (K @ alpha) - (K @ (prob.y - p)) / n)
    try:
        d = scipy.linalg.solve(A, b)
    except scipy.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(K) / n
        K_j = K + jitter * np.eye(n)
        if simplified:
            A = lam_w[:, None] * K_j + n * lam * np.eye(n)
        else:
            A = (K_j.T * lam_w) @ K_j / n + lam * K_j
        try:
            d = scipy.linalg.solve(A, b)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"dense Newton system is singular: {exc}") from exc
    if not np.isfinite(d).all():
        raise NumericalError("dense Newton direction is not finite")
    return d


def train_exact(data, config, scaler=None):
    """Same loop shape as the fast solver, with the exact matrix and Hessian."""
    X = np.ascontiguousarray(data.X, dtype=np.float64)
    y = np.asarray(data.y, dtype=np.float64)
    m = len(X)
    if m < 2:
        raise ValidationError(f"need at least 2 samples, got {m}")
    _check_binary_labels(data.y)
    if m > DENSE_CAP:
        raise CapExceededError(
            f"exact solver holds the full {m}x{m} kernel matrix; cap is {DENSE_CAP}. "
            "Use the fast solver for datasets this large."
        )

    t_start = time.perf_counter()
    K = exact_gram(config.kernel, X, cap=DENSE_CAP)
    prob = DenseProblem(K=K, y=y, lambda_=config.lambda_)
    lam = config.lambda_
    ones = np.ones(m)
    alpha = np.zeros(m)
    z = np.zeros(m)

    obj_trace, gnorm_trace = [], []
    backtracks, stalls, iters = [], 0, 0
    while True:
        p, loss = backend.probs_and_logloss(z, y, ones)
        obj = 0.5 * lam * float(alpha @ z) + loss / m
        if not np.isfinite(obj):
            raise NumericalError(f"training diverged at iteration {iters}")
        grad = lam * z - (K @ (y - p)) / m
        gnorm = float(np.linalg.norm(grad))
        obj_trace.append(obj)
        gnorm_trace.append(gnorm)
        if gnorm <= config.eps or iters >= config.t_max:
            break

        d = exact_newton_direction(prob, alpha, p)
        dz = K @ d
        g_dot_d = float(grad @ d)
        q0, q1, q2 = float(alpha @ z), float(d @ z + alpha @ dz), float(d @ dz)
        accepted = False
        for m_t in range(config.max_backtracks + 1):
            r = config.armijo_delta**m_t
            trial_loss = backend.trial_logloss(z, dz, r, y, ones)
            f_trial = 0.5 * lam * (q0 + r * q1 + r * r * q2) + trial_loss / m
            if f_trial <= obj + config.armijo_beta * r * g_dot_d:
                accepted = True
                break
        if not accepted:
            stalls += 1
        backtracks.append(m_t)
        alpha += r * d
        z += r * dz
        iters += 1

    diagnostics = {
        "iterations": iters,
        "final_grad_norm": gnorm_trace[-1],
        "objective_trace": obj_trace,
        "grad_norm_trace": gnorm_trace,
        "clamp_count": 0,
        "line_search_stalls": stalls,
        "backtracks": backtracks,
        "n_train": m,
        "padded_size": m,
        "train_seconds": time.perf_counter() - t_start,
    }
    return BinaryModel(
        alpha=alpha,
        config=config,
        order=None,
        column=np.zeros(0),
        train_X=X,
        kind="exact",
        scaler=scaler,
        diagnostics=diagnostics,
    )
