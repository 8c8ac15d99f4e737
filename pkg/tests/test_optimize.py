import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from mpflearn.optimize import (CONVERGED, LINE_SEARCH_FAILED, MAX_ITERS, OptimizerConfig,
                               SgdConfig, lbfgs_minimize, learning_rates, sgd_anneal)


class TestLbfgs:
    def test_quadratic(self):
        c = np.array([1.0, -2.0, 3.5])
        res = lbfgs_minimize(lambda x: (np.sum((x - c) ** 2), 2 * (x - c)), np.zeros(3),
                             OptimizerConfig(grad_tol=1e-11))
        assert res.converged
        assert np.max(np.abs(res.x - c)) < 1e-10
        assert res.n_iter <= 20

    def test_rosenbrock(self):
        res = lbfgs_minimize(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]),
                             OptimizerConfig(max_iters=1000, grad_tol=1e-9))
        assert res.status == CONVERGED
        assert np.linalg.norm(res.x - 1.0) < 1e-6

    def test_zero_gradient_at_start(self):
        calls = []

        def fun(x):
            calls.append(1)
            return 0.0, np.zeros_like(x)

        res = lbfgs_minimize(fun, np.ones(4))
        assert res.status == CONVERGED and res.n_iter == 0 and len(calls) == 1

    def test_trace_monotone(self):
        res = lbfgs_minimize(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]))
        assert np.all(np.diff(res.trace) <= 0)
        assert len(res.trace) == res.n_iter + 1

    def test_iteration_limit(self):
        res = lbfgs_minimize(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]),
                             OptimizerConfig(max_iters=3))
        assert res.status == MAX_ITERS and res.n_iter == 3

    def test_unbounded_linear(self):
        res = lbfgs_minimize(lambda x: (float(x[0]), np.array([1.0])), np.zeros(1),
                             OptimizerConfig(max_iters=50))
        assert res.status in (MAX_ITERS, LINE_SEARCH_FAILED)
        assert res.x[0] < 0

    def test_non_finite_start(self):
        with pytest.raises(FloatingPointError):
            lbfgs_minimize(lambda x: (np.nan, x), np.zeros(2))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(grad_tol=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(c1=1.5)


class TestSgd:
    def test_schedule_endpoints(self):
        etas = learning_rates(SgdConfig(3.0, 0.1, batch_size=10, epochs=4), 95)
        assert len(etas) == 40
        assert etas[0] == 3.0 and etas[-1] == pytest.approx(0.1)
        assert np.all(np.diff(etas) < 0)

    def test_zero_update(self, rng):
        theta = sgd_anneal(lambda t, b, eta, r: t, np.arange(3.0), np.zeros((20, 2)),
                           SgdConfig(1.0, 1.0, 5, 2), rng)
        np.testing.assert_array_equal(theta, np.arange(3.0))

    def test_visits_every_row_each_epoch(self, rng):
        seen = []

        def update(t, batch, eta, r):
            seen.extend(batch[:, 0].tolist())
            return t

        sgd_anneal(update, np.zeros(1), np.arange(23)[:, None], SgdConfig(1.0, 0.5, 4, 3), rng)
        assert sorted(seen) == sorted(list(range(23)) * 3)

    def test_mean_estimation(self, rng):
        rows = rng.normal(2.0, 1.0, size=(2000, 1))
        theta = sgd_anneal(lambda t, b, eta, r: t + eta * (b.mean(axis=0) - t), np.zeros(1),
                           rows, SgdConfig(0.5, 0.01, 50, 5), rng)
        assert theta[0] == pytest.approx(2.0, abs=0.1)

    def test_non_finite_aborts(self, rng):
        with pytest.raises(FloatingPointError, match="epoch 0"):
            sgd_anneal(lambda t, b, eta, r: t * np.inf, np.ones(1), np.zeros((4, 1)),
                       SgdConfig(), rng)

    def test_positive_rates(self):
        with pytest.raises(ValueError):
            SgdConfig(lr_start=0.0)
