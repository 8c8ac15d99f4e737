import numpy as np
import pytest
from scipy.special import expit

from mpflearn.baselines import (CdConfig, cd_fit, cd_update, exact_ml_fit,
                                has_recession_direction, ising_conditional_delta, pl_fit,
                                pl_objective, sm_integrand, sm_objective)
from mpflearn.models import GaussianModel, IsingModel, TabularModel
from mpflearn.oracle import exact_loglik_grad, fd_gradient, model_probs
from mpflearn.optimize import OptimizerConfig
from mpflearn.samplers import exact_sample
from mpflearn.statespace import Dataset, TabularDistribution, all_states, encode_state

from conftest import random_sym


class TestExactMl:
    def test_truth_is_fixed_point(self, rng):
        truth = IsingModel(random_sym(rng, 4))
        data = Dataset(all_states(4), weights=model_probs(truth))
        assert np.max(np.abs(exact_loglik_grad(truth, data))) < 1e-9

    def test_recovers_truth_from_exact_distribution(self, rng):
        truth = IsingModel(random_sym(rng, 4))
        data = Dataset(all_states(4), weights=model_probs(truth))
        fit = exact_ml_fit(IsingModel.zeros(4), data, OptimizerConfig(grad_tol=1e-8))
        assert not fit.diverged
        np.testing.assert_allclose(fit.model.params, truth.params, atol=1e-4)
        assert np.max(np.abs(fit.result.grad)) < 1e-8

    def test_single_state_diverges(self):
        data = Dataset(np.array([[1, 0]]))
        fit = exact_ml_fit(TabularModel(np.zeros(4)), data, OptimizerConfig(max_iters=200))
        assert fit.diverged

    def test_recession_direction(self):
        F = all_states(2).astype(float)
        assert has_recession_direction(F, [0])
        assert not has_recession_direction(F, [0, 1, 2, 3])
        assert has_recession_direction(np.eye(4), [1])

    def test_ising_full_support_bounded(self, rng):
        X = rng.integers(0, 2, size=(500, 3))
        fit = exact_ml_fit(IsingModel.zeros(3), Dataset(X))
        assert np.unique(X, axis=0).shape[0] == 8 and not fit.diverged

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            exact_ml_fit(IsingModel.zeros(3), Dataset(np.zeros((2, 2))))


class TestPseudolikelihood:
    def test_zero_couplings(self, rng):
        d = 5
        v, _ = pl_objective(np.zeros((d, d)), Dataset(rng.integers(0, 2, size=(10, d))))
        assert v == pytest.approx(d * np.log(0.5), abs=1e-12)

    def test_conditionals_match_enumeration(self, rng):
        d = 6
        m = IsingModel(random_sym(rng, d))
        p = model_probs(m)
        X = rng.integers(0, 2, size=(10, d))
        delta = ising_conditional_delta(m.J, X)
        for x, dl in zip(X, delta):
            for n in range(d):
                x1, x0 = x.copy(), x.copy()
                x1[n], x0[n] = 1, 0
                p1, p0 = p[encode_state(x1)], p[encode_state(x0)]
                assert expit(-dl[n]) == pytest.approx(p1 / (p1 + p0), abs=1e-12)

    def test_gradient_fd(self, rng):
        d = 5
        m = IsingModel(random_sym(rng, d))
        data = Dataset(rng.integers(0, 2, size=(25, d)))
        _, g = pl_objective(m, data)
        fd = fd_gradient(lambda t: pl_objective(IsingModel.from_params(d, t), data)[0], m.params)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6

    def test_fit_consistent(self, rng):
        truth = IsingModel(random_sym(rng, 4))
        data = Dataset(all_states(4), weights=model_probs(truth))
        fit = pl_fit(data, OptimizerConfig(grad_tol=1e-10))
        np.testing.assert_allclose(fit.model.params, truth.params, atol=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pl_objective(np.zeros((3, 3)), Dataset(np.zeros((2, 2))))


class TestContrastiveDivergence:
    def test_stationary_update_vanishes(self, rng):
        m = IsingModel(random_sym(rng, 6))
        N = 40000
        X = exact_sample(TabularDistribution(6, model_probs(m)), N, rng)
        steps = np.array([cd_update(m, X[i:i + 2000], 1, 1.0, rng) - m.params
                          for i in range(0, N, 2000)])
        se = steps.std(axis=0, ddof=1) / np.sqrt(len(steps))
        assert np.all(np.abs(steps.mean(axis=0)) < 4 * se + 1e-3)

    def test_datum_energy_lowered(self, rng):
        m = IsingModel([[0.0]])
        new = cd_update(m, np.ones((5000, 1), dtype=np.int8), 1, 1.0, rng)
        # positive phase gives -1, negative phase ~ +1/2
        assert new[0] < 0
        assert IsingModel([[new[0]]]).energy([1]) < m.energy([1])

    def test_fit_moves_towards_data(self, rng):
        truth = IsingModel(random_sym(rng, 4, scale=1.0))
        X = exact_sample(TabularDistribution(4, model_probs(truth)), 5000, rng)
        fit = cd_fit(IsingModel.zeros(4), Dataset(X), CdConfig(epochs=5), rng)
        err0 = np.mean(truth.params ** 2)
        assert np.mean((fit.model.params - truth.params) ** 2) < err0

    def test_rejects_weighted(self, rng):
        data = Dataset(np.array([[0, 1], [1, 1]]), weights=[0.3, 0.7])
        with pytest.raises(ValueError):
            cd_fit(IsingModel.zeros(2), data, rng=rng)

    def test_config(self):
        with pytest.raises(ValueError):
            CdConfig(k=0)
        sgd = CdConfig().sgd(4)
        assert (sgd.lr_start, sgd.lr_end) == (0.75, 0.025)
        sgd = CdConfig(scale_by_dim=False).sgd(4)
        assert (sgd.lr_start, sgd.lr_end) == (3.0, 0.1)


class TestScoreMatching:
    def test_quadratic_point(self):
        assert sm_integrand(GaussianModel(np.eye(2)), [1.0, 1.0])[0] == pytest.approx(-1.0)

    def test_standard_normal_mean(self, rng):
        X = rng.standard_normal((100000, 2))
        vals = sm_integrand(GaussianModel(np.eye(2)), X)
        se = vals.std() / np.sqrt(len(vals))
        assert abs(sm_objective(GaussianModel(np.eye(2)), Dataset(X, kind="continuous")) + 1) \
            < 4 * se

    def test_needs_second_derivatives(self):
        with pytest.raises(TypeError):
            sm_integrand(IsingModel.zeros(2), [[0.0, 1.0]])

    def test_needs_continuous_data(self):
        with pytest.raises(ValueError):
            sm_objective(GaussianModel(np.eye(2)), Dataset(np.zeros((2, 2))))
