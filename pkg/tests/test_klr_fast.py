import numpy as np
import pytest
from types import SimpleNamespace

from mcmklr import klr_fast, mcm
from mcmklr.errors import DimensionError, NumericalError, ValidationError
from mcmklr.kernel import GridSpec, RadialKernel, choose_level_order, construct_column, exact_gram
from mcmklr.klr_fast import (
    ArmijoResult,
    BinaryModel,
    TrainConfig,
    TrainState,
    armijo_search,
    gradient,
    newton_direction,
    objective,
    predict,
    probabilities,
    tau,
    train,
)
from mcmklr.tensor_fft import FftPlan, LevelOrder

from conftest import symmetric_column


def make_cfg(**kw):
    kw.setdefault("lambda_", 1e-2)
    kw.setdefault("kernel", RadialKernel(sigma=1.0))
    return TrainConfig(**kw)


def random_instance(rng, dims, m=None, scale=0.5):
    """Random padded problem on a symmetric-column MCM."""
    order = LevelOrder(dims)
    N = order.n
    m = N if m is None else m
    M = mcm.from_first_column(scale * symmetric_column(rng, order), order)
    y = np.zeros(N)
    y[:m] = (rng.random(m) < 0.5).astype(float)
    mask = np.zeros(N)
    mask[:m] = 1.0
    alpha = rng.standard_normal(N) * 0.3
    return M, alpha, y, mask


def fd_gradient(f, alpha, eps=1e-6):
    g = np.zeros_like(alpha)
    for i in range(len(alpha)):
        e = np.zeros_like(alpha)
        e[i] = eps
        g[i] = (f(alpha + e) - f(alpha - e)) / (2 * eps)
    return g


class TestConfigValidation:
    def test_accepts_paper_style_settings(self):
        make_cfg(lambda_=1e-3, kernel=RadialKernel(sigma=8.0))

    @pytest.mark.parametrize(
        "kw",
        [
            {"lambda_": 0.0},
            {"armijo_delta": 1.0},
            {"armijo_delta": 0.0},
            {"armijo_beta": 0.5},
            {"armijo_beta": 0.0},
            {"t_max": 0},
            {"eps": 0.0},
            {"max_backtracks": 0},
        ],
    )
    def test_rejects_out_of_range(self, kw):
        with pytest.raises(ValidationError):
            make_cfg(**kw)


class TestProbabilities:
    def test_zero_alpha(self):
        M = mcm.identity(LevelOrder([2, 3]))
        z, p = probabilities(M, np.zeros(6))
        np.testing.assert_array_equal(z, np.zeros(6))
        np.testing.assert_array_equal(p, np.full(6, 0.5))

    def test_saturation_clamped(self):
        M = mcm.identity(LevelOrder([2]))
        _, p = probabilities(M, np.array([40.0, -40.0]))
        assert p[0] == 1 - 1e-15 and p[1] == 1e-15

    def test_matches_dense(self, rng):
        M, alpha, _, _ = random_instance(rng, [3, 4])
        z, p = probabilities(M, alpha)
        z_ref = mcm.to_dense(M) @ alpha
        p_ref = 1 / (1 + np.exp(-z_ref))
        np.testing.assert_allclose(z, z_ref, atol=1e-12)
        np.testing.assert_allclose(p, p_ref, atol=1e-12)


class TestObjective:
    def test_zero_alpha_gives_log2(self, rng):
        M, _, y, mask = random_instance(rng, [4, 3], m=10)
        got = objective(M, np.zeros(12), y, mask, 0.05)
        assert abs(got - np.log(2.0)) < 1e-12

    def test_matches_dense_formula(self, rng):
        M, alpha, y, mask = random_instance(rng, [2, 3, 2], m=9)
        lam = 0.07
        K = mcm.to_dense(M)
        z = K @ alpha
        p = 1 / (1 + np.exp(-z))
        n_eff = mask.sum()
        want = 0.5 * lam * alpha @ K @ alpha - (
            mask * (y * np.log(p) + (1 - y) * np.log(1 - p))
        ).sum() / n_eff
        assert abs(objective(M, alpha, y, mask, lam) - want) < 1e-12


class TestGradient:
    def test_zero_alpha_formula(self, rng):
        M, _, y, mask = random_instance(rng, [3, 3])
        lam = 0.1
        got = gradient(M, np.zeros(9), np.full(9, 0.5), y, mask, lam)
        want = mcm.to_dense(M) @ (-(mask * (y - 0.5)) / mask.sum())
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_padding_annihilated(self, rng):
        # residuals on masked-out coordinates must not leak into the gradient
        M, alpha, y, mask = random_instance(rng, [4, 3], m=7)
        p = 1 / (1 + np.exp(-(mcm.to_dense(M) @ alpha)))
        got = gradient(M, alpha, p, y, mask, 0.05)
        y2 = y.copy()
        y2[7:] = 1.0  # junk labels on the padding; mask must hide them
        got2 = gradient(M, alpha, p, y2, mask, 0.05)
        np.testing.assert_allclose(got, got2, atol=1e-14)

    def test_finite_differences(self, rng):
        for _ in range(5):
            M, alpha, y, mask = random_instance(rng, [4, 4], m=13)
            lam = 10 ** rng.uniform(-3, -1)
            z, p = probabilities(M, alpha)
            got = gradient(M, alpha, p, y, mask, lam)
            want = fd_gradient(lambda a: objective(M, a, y, mask, lam), alpha)
            assert np.linalg.norm(got - want) <= 1e-5 * max(np.linalg.norm(want), 1e-12)


class TestTau:
    def test_uniform_half(self):
        assert abs(tau(np.full(8, 0.5), np.ones(8)) - 0.25) < 1e-15

    def test_hand_case(self):
        p = np.array([0.5, 0.5, 0.9, 0.9])
        assert abs(tau(p, np.ones(4)) - 0.17) < 1e-12

    def test_saturated_still_positive(self):
        p = np.full(6, 1e-15)
        t = tau(p, np.ones(6))
        assert 0 < t <= 0.25

    def test_mask_filtering(self):
        p = np.array([0.5, 0.9])
        mask = np.array([1.0, 0.0])
        assert abs(tau(p, mask) - 0.25) < 1e-15


class TestNewtonDirection:
    def test_identity_hand_case(self, rng):
        order = LevelOrder([8])
        M = mcm.identity(order)
        y = (rng.random(8) < 0.5).astype(float)
        mask = np.ones(8)
        d = newton_direction(M, np.zeros(8), np.full(8, 0.5), y, mask, lambda_=1 / 8)
        np.testing.assert_allclose(d, 0.8 * (y - 0.5), rtol=1e-12, atol=1e-14)

    def test_zero_residual_gives_zero(self, rng):
        M, _, _, mask = random_instance(rng, [3, 4])
        p = np.clip(rng.random(12), 0.05, 0.95)
        d = newton_direction(M, np.zeros(12), p, p.copy(), mask, 0.1)
        np.testing.assert_allclose(d, np.zeros(12), atol=1e-12)

    def test_matches_dense_solve(self, rng):
        for _ in range(5):
            M, alpha, y, mask = random_instance(rng, [6, 6, 6], m=200)
            lam = 0.05
            z, p = probabilities(M, alpha)
            got = newton_direction(M, alpha, p, y, mask, lam)
            n_eff = mask.sum()
            t = (mask * p * (1 - p)).sum() / n_eff
            A = t * mcm.to_dense(M) + n_eff * lam * np.eye(M.n)
            rhs = mask * (y - p) - n_eff * lam * alpha
            want = np.linalg.solve(A, rhs)
            assert np.linalg.norm(got - want) <= 1e-8 * max(np.linalg.norm(want), 1e-12)


class TestArmijo:
    def _state(self, M, alpha, y, mask, lam):
        z, p = probabilities(M, alpha)
        return TrainState(
            alpha=alpha,
            p=p,
            grad=gradient(M, alpha, p, y, mask, lam),
            objective=objective(M, alpha, y, mask, lam),
            iter=0,
            mask=mask,
            y=y,
        )

    def test_zero_direction_full_step(self, rng):
        M, alpha, y, mask = random_instance(rng, [3, 3])
        st = self._state(M, alpha, y, mask, 0.05)
        res = armijo_search(M, st, np.zeros(9), make_cfg(lambda_=0.05))
        assert res.step == 1.0 and res.backtracks == 0 and not res.stalled

    def test_newton_step_accepted_on_easy_problem(self, rng):
        kern = RadialKernel(sigma=1.0)
        order = choose_level_order(16, q=1)
        grid = GridSpec.unit(order)
        M = mcm.from_first_column(construct_column(kern, grid), order)
        y = np.zeros(order.n)
        y[:16] = (rng.random(16) < 0.5).astype(float)
        mask = np.zeros(order.n)
        mask[:16] = 1.0
        lam = 0.5
        alpha = np.zeros(order.n)
        st = self._state(M, alpha, y, mask, lam)
        d = newton_direction(M, alpha, st.p, y, mask, lam)
        res = armijo_search(M, st, d, make_cfg(lambda_=lam))
        assert res.step == 1.0 and not res.stalled

    def _psd_instance(self, rng, m=13):
        # a kernel-built column with a strictly positive spectrum, so the
        # surrogate objective is convex and step-size pathologies are real
        order = LevelOrder([4, 4])
        M = mcm.from_first_column(
            construct_column(RadialKernel(sigma=1.0), GridSpec.unit(order)), order
        )
        assert M.eigenvalues.min() > 0
        y = np.zeros(16)
        y[:m] = (rng.random(m) < 0.5).astype(float)
        mask = np.zeros(16)
        mask[:m] = 1.0
        alpha = 0.3 * rng.standard_normal(16)
        return M, alpha, y, mask

    def test_overshoot_backtracks_and_descends(self, rng):
        M, alpha, y, mask = self._psd_instance(rng)
        lam = 0.05
        st = self._state(M, alpha, y, mask, lam)
        d = 100.0 * newton_direction(M, alpha, st.p, y, mask, lam)
        cfg = make_cfg(lambda_=lam)
        res = armijo_search(M, st, d, cfg)
        assert res.backtracks > 0
        f_new = objective(M, alpha + res.step * d, y, mask, lam)
        assert f_new < st.objective

    def test_stall_reported(self, rng):
        # an ascent direction on a convex objective can never satisfy the
        # sufficient-decrease test
        M, alpha, y, mask = self._psd_instance(rng)
        lam = 0.05
        st = self._state(M, alpha, y, mask, lam)
        res = armijo_search(M, st, st.grad * 50, make_cfg(lambda_=lam, max_backtracks=5))
        assert res.stalled and res.backtracks == 5


class TestTrain:
    def test_two_point_separable(self):
        data = SimpleNamespace(X=np.array([[0.0, 0.0], [1.0, 1.0]]), y=np.array([0, 1]))
        cfg = make_cfg(lambda_=1e-4, kernel=RadialKernel(sigma=2.0))
        model = train(data, cfg)
        assert model.diagnostics["final_grad_norm"] <= cfg.eps
        scores = predict(model, data.X)
        assert ((scores >= 0.5).astype(int) == data.y).all()

    def test_rejects_nonbinary_labels(self):
        data = SimpleNamespace(X=np.zeros((3, 1)), y=np.array([0, 1, 2]))
        with pytest.raises(ValidationError):
            train(data, make_cfg())

    def test_rejects_single_sample(self):
        data = SimpleNamespace(X=np.zeros((1, 1)), y=np.array([1]))
        with pytest.raises(ValidationError):
            train(data, make_cfg())

    def test_first_iteration_matches_dense_surrogate(self, rng):
        # one Newton update recomputed with the materialized matrix
        m = 250
        X = rng.random((m, 2))
        y = (rng.random(m) < 0.5).astype(np.int64)
        cfg = make_cfg(lambda_=1e-2, kernel=RadialKernel(sigma=4.0), t_max=1)
        model = train(SimpleNamespace(X=X, y=y), cfg)
        order = model.order
        N = order.n
        M = mcm.from_first_column(model.column, order)
        K = mcm.to_dense(M)
        y_p = np.zeros(N)
        y_p[:m] = y
        mask = np.zeros(N)
        mask[:m] = 1.0
        lam = cfg.lambda_
        p = np.full(N, 0.5)
        t = (mask * p * (1 - p)).sum() / m
        d = np.linalg.solve(t * K + m * lam * np.eye(N), mask * (y_p - p) - 0.0)
        # replicate the backtracking on the dense surrogate objective
        def F(a):
            z = K @ a
            pp = np.clip(1 / (1 + np.exp(-z)), 1e-15, 1 - 1e-15)
            return 0.5 * lam * a @ z - (mask * (y_p * np.log(pp) + (1 - y_p) * np.log(1 - pp))).sum() / m

        g = K @ (lam * np.zeros(N) - mask * (y_p - p) / m)
        f0, gd = F(np.zeros(N)), g @ d
        r = 1.0
        while F(r * d) > f0 + cfg.armijo_beta * r * gd:
            r *= cfg.armijo_delta
        np.testing.assert_allclose(model.alpha, r * d, rtol=0, atol=1e-8)

    def test_descent_and_termination(self, rng):
        m = 160
        X = rng.random((m, 2))
        s = X[:, 0] + X[:, 1] - 1.0
        y = (s > 0).astype(np.int64)
        cfg = make_cfg(lambda_=1e-3, kernel=RadialKernel(sigma=8.0))
        model = train(SimpleNamespace(X=X, y=y), cfg)
        trace = model.diagnostics["objective_trace"]
        assert all(b < a for a, b in zip(trace, trace[1:]))
        assert (
            model.diagnostics["final_grad_norm"] <= cfg.eps
            or model.diagnostics["iterations"] == cfg.t_max
        )

    def test_padded_coordinates_vanish_at_optimum(self, rng):
        # stationarity pushes regularized padding weights to zero
        m = 10
        X = rng.random((m, 2))
        y = (rng.random(m) < 0.5).astype(np.int64)
        cfg = make_cfg(lambda_=0.05, kernel=RadialKernel(sigma=1.0), eps=1e-10, t_max=50)
        model = train(SimpleNamespace(X=X, y=y), cfg)
        pad = model.alpha[m:]
        if len(pad):
            assert np.abs(pad).max() < 1e-6

    def test_transform_counts(self, rng):
        m = 36
        X = rng.random((m, 2))
        y = (rng.random(m) < 0.5).astype(np.int64)
        model = train(SimpleNamespace(X=X, y=y), make_cfg(lambda_=1e-2))
        T = model.diagnostics["iterations"]
        # per update: one gradient product, one shifted solve, one direction
        # product; plus the final gradient that fires the stop test
        assert model.diagnostics["fft_forward"] == 3 * T + 1
        assert model.diagnostics["fft_adjoint"] == 3 * T + 1

    def test_op_level_transform_counts(self, rng):
        M, alpha, y, mask = random_instance(rng, [4, 4])
        lam = 0.05
        plan = FftPlan(M.order)
        z, p = probabilities(M, alpha)
        gradient(M, alpha, p, y, mask, lam, plan=plan)
        assert (plan.n_forward, plan.n_adjoint) == (1, 1)
        newton_direction(M, alpha, p, y, mask, lam, plan=plan)
        assert (plan.n_forward, plan.n_adjoint) == (2, 2)
        st = TrainState(alpha=alpha, p=p, grad=np.zeros(M.n), objective=1.0, mask=mask, y=y, iter=0)
        armijo_search(M, st, np.zeros(M.n), make_cfg(lambda_=lam), plan=plan)
        assert (plan.n_forward, plan.n_adjoint) == (4, 4)


class TestPredict:
    def test_zero_alpha_scores_half(self, rng):
        model = BinaryModel(
            alpha=np.zeros(4),
            config=make_cfg(),
            order=LevelOrder([4]),
            column=np.eye(4)[0],
            train_X=rng.random((4, 2)),
        )
        np.testing.assert_array_equal(predict(model, rng.random((5, 2))), np.full(5, 0.5))

    def test_matches_dense_scoring(self, rng):
        m = 30
        kern = RadialKernel(sigma=2.0)
        X = rng.random((m, 3))
        alpha = rng.standard_normal(m)
        model = BinaryModel(
            alpha=alpha,
            config=make_cfg(kernel=kern),
            order=LevelOrder([m]),
            column=np.zeros(m),
            train_X=X,
        )
        Q = rng.random((17, 3))
        want = 1 / (1 + np.exp(-(exact_gram(kern, np.vstack([Q, X]))[:17, 17:] @ alpha)))
        got = predict(model, Q, block=5)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        model = BinaryModel(
            alpha=np.zeros(4), config=make_cfg(), order=LevelOrder([4]),
            column=np.zeros(4), train_X=rng.random((4, 2)),
        )
        with pytest.raises(DimensionError):
            predict(model, rng.random((3, 5)))

    def test_interpolating_model_saturates(self):
        X = np.array([[0.0, 0.0], [10.0, 10.0]])
        model = BinaryModel(
            alpha=np.array([80.0, -80.0]), config=make_cfg(kernel=RadialKernel(sigma=1.0)),
            order=LevelOrder([2]), column=np.zeros(2), train_X=X,
        )
        s = predict(model, X)
        assert s[0] > 1 - 1e-10 and s[1] < 1e-10
