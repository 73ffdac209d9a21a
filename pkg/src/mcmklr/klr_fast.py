"""Fast Newton training for kernel logistic regression on an MCM surrogate.

The dense Gram matrix is replaced by a multilevel circulant approximant
K built from the lattice column, so one Newton iteration costs three
FFT-based products: the Hessian is collapsed to tau*K with tau the mean
IRLS weight, which turns the Newton system into a single shifted
spectral solve

    d = solve((K + shift I), (mask(y - p) - n_eff*lam*alpha) / tau),
    shift = n_eff * lam / tau.

Backtracking keeps the surrogate objective monotone; scores K@alpha and
K@d are cached so every backtrack trial is a length-N pass without
transforms. Datasets whose size m does not factor into the level order
are padded to N with a zero mask; masked entries carry no data weight
while the quadratic regularizer runs over the full padded vector.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import backend, mcm
from .errors import DimensionError, NumericalError, ValidationError
from .kernel import GridSpec, RadialKernel, choose_level_order, construct_column, pairwise_sq_dists
from .tensor_fft import FftPlan


@dataclass
class TrainConfig:
    lambda_: float
    kernel: RadialKernel
    grid: object = "auto"  # GridSpec, or "auto" to derive one from the sample count
    auto_q: int = 3  # levels used when grid == "auto"
    auto_h: float = 1.0  # lattice step used when grid == "auto"
    t_max: int = 30
    eps: float = 1e-5
    armijo_delta: float = 0.5
    armijo_beta: float = 0.1
    max_backtracks: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValidationError(f"lambda must be positive, got {self.lambda_}")
        if not 0 < self.armijo_delta < 1:
            raise ValidationError(f"delta must lie in (0,1), got {self.armijo_delta}")
        if not 0 < self.armijo_beta < 0.5:
            raise ValidationError(f"beta must lie in (0,0.5), got {self.armijo_beta}")
        if self.t_max < 1:
            raise ValidationError(f"t_max must be >= 1, got {self.t_max}")
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if self.max_backtracks < 1:
            raise ValidationError(f"max_backtracks must be >= 1, got {self.max_backtracks}")
        if self.auto_q < 1:
            raise ValidationError(f"auto_q must be >= 1, got {self.auto_q}")
        if not self.auto_h > 0:
            raise ValidationError(f"auto_h must be positive, got {self.auto_h}")


@dataclass
class TrainState:
    """Mutable loop state over the padded length-N problem."""

    alpha: np.ndarray
    p: np.ndarray
    grad: np.ndarray
    objective: float
    iter: int
    mask: np.ndarray
    y: np.ndarray


@dataclass
class BinaryModel:
    """Trained coefficients plus everything needed to score new points."""

    alpha: np.ndarray
    config: TrainConfig
    order: object  # LevelOrder, or None for a dense-solver model
    column: np.ndarray
    train_X: np.ndarray
    kind: str = "mcm"  # "mcm" or "exact"
    scaler: object = None  # (mins, spans) when features were min-max scaled
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_train(self):
        return len(self.train_X)

    def train_alpha(self):
        """Coefficients restricted to the real (unpadded) samples."""
        return self.alpha[: self.n_train]


@dataclass
class ArmijoResult:
    step: float
    backtracks: int
    stalled: bool


def probabilities(M, alpha, plan=None):
    """Scores z = M @ alpha and clamped probabilities p = sigmoid(z)."""
    z = mcm.matvec(M, alpha, plan)
    zero = np.zeros_like(z)
    p, _ = backend.probs_and_logloss(z, zero, zero)
    return z, p


def objective(M, alpha, y, mask, lambda_, plan=None):
    """Regularized surrogate objective over the padded problem.

    Quadratic term spans all N coordinates; the data term averages the
    log-loss over the n_eff = sum(mask) real samples.
    """
    n_eff = float(np.sum(mask))
    if n_eff < 1:
        raise ValidationError("mask selects no samples")
    z = mcm.matvec(M, alpha, plan)
    _, loss = backend.probs_and_logloss(z, y, mask)
    return 0.5 * lambda_ * float(np.dot(alpha, z)) + loss / n_eff


def gradient(M, alpha, p, y, mask, lambda_, plan=None):
    """Surrogate gradient M @ (lambda*alpha - mean residual); one matvec."""
    n_eff = float(np.sum(mask))
    inner = lambda_ * alpha - (mask * (y - p)) / n_eff
    return mcm.matvec(M, inner, plan)


def tau(p, mask):
    """Mean masked IRLS weight p(1-p); in (0, 0.25] under the probability clamp."""
    n_eff = float(np.sum(mask))
    return backend.tau_sum(np.ascontiguousarray(p), np.ascontiguousarray(mask)) / n_eff


def newton_direction(M, alpha, p, y, mask, lambda_, counters=None, plan=None):
    """Closed-form approximate Newton direction via one shifted solve."""
    n_eff = float(np.sum(mask))
    t = tau(p, mask)
    shift = n_eff * lambda_ / t
    rhs = (mask * (y - p) - n_eff * lambda_ * alpha) / t
    return mcm.solve_shifted(M, shift, rhs, counters=counters, plan=plan)


def armijo_search(M, state, direction, config, z=None, dz=None, plan=None):
    """Backtracking line search on the surrogate objective.

    Caches z = M@alpha and dz = M@direction (computing them when not
    supplied), so each trial is an O(N) pass. When no step within
    max_backtracks satisfies the sufficient-decrease test, the last
    trial step is returned with stalled=True; the caller records the
    diagnostic and proceeds.
    """
    if z is None:
        z = mcm.matvec(M, state.alpha, plan)
    if dz is None:
        dz = mcm.matvec(M, direction, plan)
    n_eff = float(np.sum(state.mask))
    lam = config.lambda_
    g_dot_d = float(np.dot(state.grad, direction))
    f0 = state.objective
    q0 = float(np.dot(state.alpha, z))
    q1 = float(np.dot(direction, z) + np.dot(state.alpha, dz))
    q2 = float(np.dot(direction, dz))
    r = 1.0
    for m_t in range(config.max_backtracks + 1):
        r = config.armijo_delta**m_t
        loss = backend.trial_logloss(z, dz, r, state.y, state.mask)
        f_trial = 0.5 * lam * (q0 + r * q1 + r * r * q2) + loss / n_eff
        if f_trial <= f0 + config.armijo_beta * r * g_dot_d:
            return ArmijoResult(step=r, backtracks=m_t, stalled=False)
    return ArmijoResult(step=r, backtracks=config.max_backtracks, stalled=True)


def _resolve_grid(config, m):
    if isinstance(config.grid, GridSpec):
        if config.grid.order.n < m:
            raise ValidationError(
                f"grid size {config.grid.order.n} cannot hold {m} samples"
            )
        return config.grid
    if config.grid == "auto":
        order = choose_level_order(m, config.auto_q)
        return GridSpec((config.auto_h,) * order.q, order)
    raise ValidationError(f"grid must be a GridSpec or 'auto', got {config.grid!r}")


def _check_binary_labels(y):
    vals = np.unique(y)
    if not np.isin(vals, (0, 1)).all():
        raise ValidationError(f"labels must be 0/1, got values {vals[:8]}")


def train(data, config, shared=None, scaler=None):
    """Run the fast Newton loop; returns a BinaryModel with diagnostics.

    shared, when given, is a prebuilt (MultilevelCirculant, GridSpec)
    pair so one-vs-all training reuses the label-independent column.
    Each call still works on its own FFT plan, keeping concurrent
    training jobs safe.
    """
    X = np.ascontiguousarray(data.X, dtype=np.float64)
    y_in = np.asarray(data.y)
    m = len(X)
    if m < 2:
        raise ValidationError(f"need at least 2 samples, got {m}")
    _check_binary_labels(y_in)

    t_start = time.perf_counter()
    if shared is not None:
        M, grid = shared
        if M.n < m:
            raise ValidationError(f"shared matrix size {M.n} cannot hold {m} samples")
    else:
        grid = _resolve_grid(config, m)
        M = mcm.from_first_column(construct_column(config.kernel, grid), grid.order)
    plan = FftPlan(M.order)
    N = M.n
    n_eff = float(m)
    lam = config.lambda_

    y = np.zeros(N)
    y[:m] = y_in
    mask = np.zeros(N)
    mask[:m] = 1.0
    alpha = np.zeros(N)
    z = np.zeros(N)

    solve_diag = mcm.SolveDiagnostics()
    obj_trace, gnorm_trace = [], []
    backtracks, stalls, iters = [], 0, 0
    state = TrainState(alpha=alpha, p=None, grad=None, objective=np.inf, iter=0, mask=mask, y=y)

    while True:
        p, loss = backend.probs_and_logloss(z, y, mask)
        obj = 0.5 * lam * float(np.dot(alpha, z)) + loss / n_eff
        if not np.isfinite(obj):
            raise NumericalError(f"training diverged at iteration {iters}")
        grad = gradient(M, alpha, p, y, mask, lam, plan)
        gnorm = float(np.linalg.norm(grad))
        obj_trace.append(obj)
        gnorm_trace.append(gnorm)
        if gnorm <= config.eps or iters >= config.t_max:
            break

        state.p, state.grad, state.objective, state.iter = p, grad, obj, iters
        d = newton_direction(M, alpha, p, y, mask, lam, counters=solve_diag, plan=plan)
        dz = mcm.matvec(M, d, plan)
        res = armijo_search(M, state, d, config, z=z, dz=dz, plan=plan)
        if res.stalled:
            stalls += 1
        backtracks.append(res.backtracks)
        alpha += res.step * d
        z += res.step * dz
        iters += 1

    diagnostics = {
        "iterations": iters,
        "final_grad_norm": gnorm_trace[-1],
        "objective_trace": obj_trace,
        "grad_norm_trace": gnorm_trace,
        "clamp_count": solve_diag.clamp_count,
        "line_search_stalls": stalls,
        "backtracks": backtracks,
        "n_train": m,
        "padded_size": N,
        "train_seconds": time.perf_counter() - t_start,
        "fft_forward": plan.n_forward,
        "fft_adjoint": plan.n_adjoint,
    }
    return BinaryModel(
        alpha=alpha,
        config=config,
        order=M.order,
        column=np.array(M.first_column),
        train_X=X,
        kind="mcm",
        scaler=scaler,
        diagnostics=diagnostics,
    )


def predict(model, X_test, block=512):
    """Scores sigma(sum_j alpha_j g(||x - x_j||)) over the training points.

    Streams the test rows in blocks so memory stays at block * n_train.
    Scores are strict probabilities in (0,1); class 1 iff score >= 0.5.
    """
    X_test = np.ascontiguousarray(X_test, dtype=np.float64)
    if X_test.ndim != 2 or X_test.shape[1] != model.train_X.shape[1]:
        raise DimensionError(
            f"test features have shape {X_test.shape}, training dimension is {model.train_X.shape[1]}"
        )
    if model.scaler is not None:
        mins, spans = model.scaler
        X_test = (X_test - mins) / spans
    alpha = np.ascontiguousarray(model.train_alpha())
    sigma = model.config.kernel.sigma
    out = np.empty(len(X_test))
    for lo in range(0, len(X_test), block):
        sqd = pairwise_sq_dists(X_test[lo : lo + block], model.train_X)
        margins = backend.exp_vote(np.ascontiguousarray(sqd), sigma, alpha)
        zeros = np.zeros_like(margins)
        p, _ = backend.probs_and_logloss(margins, zeros, zeros)
        out[lo : lo + len(margins)] = p
    return out
