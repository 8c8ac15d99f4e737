import numpy as np
import pytest
from scipy.special import expit

from mpflearn.models import GaussianModel, IsingModel, RbmModel
from mpflearn.oracle import model_probs
from mpflearn.samplers import (HmcConfig, exact_sample, gibbs_sample, gibbs_sweep, hamiltonian,
                               hmc_sample, leapfrog, rbm_block_gibbs)
from mpflearn.statespace import TabularDistribution, encode_state

from conftest import random_sym


class TestExact:
    def test_point_mass(self, rng):
        p = np.zeros(8)
        p[5] = 1.0
        X = exact_sample(TabularDistribution(3, p), 50, rng)
        assert np.all(encode_state(X) == 5)

    def test_uniform_frequencies(self, rng):
        N = 40000
        X = exact_sample(TabularDistribution(2, np.full(4, 0.25)), N, rng)
        counts = np.bincount(encode_state(X), minlength=4)
        sigma = np.sqrt(N * 0.25 * 0.75)
        assert np.all(np.abs(counts - N / 4) < 4 * sigma)


class TestGibbs:
    def test_hand_computed_conditional(self, rng):
        model = IsingModel([[0.0, 1.0], [1.0, 0.0]])
        N = 40000
        X = np.tile([[0, 1]], (N, 1))
        # only unit 0 is examined; unit 1 is then resampled afterwards
        freq = gibbs_sweep(model, X, rng)[:, 0].mean()
        p = expit(-2.0)
        assert p == pytest.approx(0.11920, abs=1e-5)
        assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / N)

    def test_zero_couplings_half(self, rng):
        X = gibbs_sweep(IsingModel.zeros(3), np.zeros((20000, 3), dtype=np.int8), rng)
        assert np.all(np.abs(X.mean(axis=0) - 0.5) < 4 * np.sqrt(0.25 / 20000))

    def test_stationary_distribution(self, rng):
        model = IsingModel(random_sym(rng, 4))
        p = model_probs(model)
        N = 20000
        X = gibbs_sample(model, N, rng, burn_in=50, thin=2, chains=1000)
        freq = np.bincount(encode_state(X), minlength=16) / N
        # chains are correlated only weakly after thinning; allow a generous band
        se = np.sqrt(p * (1 - p) / N)
        assert np.all(np.abs(freq - p) < 6 * se + 1e-3)

    def test_generic_energy_path(self, rng):
        model = RbmModel(rng.normal(size=(2, 3)))
        X = gibbs_sweep(model, rng.integers(0, 2, size=(10, 3)), rng)
        assert X.shape == (10, 3) and set(np.unique(X)) <= {0, 1}

    def test_rbm_block_gibbs_shape(self, rng):
        model = RbmModel(rng.normal(size=(2, 3)))
        V = rbm_block_gibbs(model, rng.integers(0, 2, size=(5, 3)), rng, steps=3)
        assert V.shape == (5, 3)


class TestHmc:
    def test_leapfrog_reversible(self, rng):
        m = GaussianModel(np.array([[2.0, 0.3], [0.3, 1.0]]))
        x0, v0 = rng.normal(size=2), rng.normal(size=2)
        x1, v1 = leapfrog(m.x_grad, x0, v0, 25, 0.1)
        x2, v2 = leapfrog(m.x_grad, x1, -v1, 25, 0.1)
        np.testing.assert_allclose(x2, x0, atol=1e-10)
        np.testing.assert_allclose(-v2, v0, atol=1e-10)

    def test_small_step_conserves_energy(self, rng):
        m = GaussianModel(np.eye(2))
        x0, v0 = rng.normal(size=2), rng.normal(size=2)
        x1, v1 = leapfrog(m.x_grad, x0, v0, 1000, 1e-3)
        assert hamiltonian(m.energy, x1, v1) == pytest.approx(hamiltonian(m.energy, x0, v0),
                                                                abs=1e-6)
        _, acc = hmc_sample(m.energy, m.x_grad, rng.normal(size=(200, 2)),
                            HmcConfig(20, 1e-3), rng)
        assert acc == 200

    def test_gaussian_moments(self, rng):
        m = GaussianModel(np.eye(2))
        # independent chains make the kept samples iid
        n = 10000
        x = 3.0 * rng.normal(size=(n, 2))
        for _ in range(30):
            x, _ = hmc_sample(m.energy, m.x_grad, x, HmcConfig(10, 0.17), rng)
        assert np.all(np.abs(x.mean(axis=0)) < 3 / np.sqrt(n))
        C = np.cov(x.T)
        se = np.array([[np.sqrt(2.0 / n), np.sqrt(1.0 / n)], [np.sqrt(1.0 / n), np.sqrt(2.0 / n)]])
        assert np.all(np.abs(C - np.eye(2)) < 3 * se)

    def test_non_finite_rejected(self, rng):
        def energy(x):
            return np.where(np.abs(x[:, 0]) > 0.5, np.nan, 0.5 * np.sum(x * x, axis=1))

        def grad(x):
            return x

        with pytest.warns(RuntimeWarning, match="non-finite"):
            x, acc = hmc_sample(energy, grad, np.zeros((20, 2)), HmcConfig(20, 0.2), rng)
        assert np.all(np.abs(x[:, 0]) <= 0.5)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HmcConfig(step_size=0.0)
