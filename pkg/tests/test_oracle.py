import numpy as np
import pytest
from scipy.linalg import expm

from mpflearn.flow import SINGLE_BIT_FLIP, ising_mpf_params
from mpflearn.models import GaussianModel, IsingModel, TabularModel
from mpflearn.oracle import (build_flow_matrix, evolve, exact_loglik, exact_loglik_grad,
                             fd_gradient, hessian_min_eig, kl_flow_check, log_partition,
                             model_probs, partition_function, sm_limit_check, spectral_bound,
                             spectrum)
from mpflearn.statespace import Dataset, all_states, empirical_distribution

from conftest import random_sym


def sparse_data(rng, d, count):
    """Distinct states at pairwise Hamming distance >= 2."""
    chosen = []
    while len(chosen) < count:
        x = rng.integers(0, 2, size=d)
        if all(np.sum(x != y) >= 2 for y in chosen):
            chosen.append(x)
    return Dataset(np.array(chosen))


class TestPartition:
    def test_flat_energies(self):
        assert partition_function(TabularModel(np.zeros(8))) == pytest.approx(8.0, abs=1e-12)

    def test_one_dimensional(self):
        Z = partition_function(TabularModel([0.0, np.log(3.0)]))
        assert Z == pytest.approx(4.0 / 3.0, abs=1e-12)

    def test_probs_normalized(self, rng):
        p = model_probs(IsingModel(random_sym(rng, 6, scale=2.0)))
        assert p.sum() == pytest.approx(1.0, abs=1e-12) and np.all(p > 0)

    def test_log_partition_large_energies(self):
        assert log_partition(TabularModel(np.array([1000.0, 1001.0]))) == pytest.approx(
            -1000.0 + np.log1p(np.exp(-1.0)))

    def test_ml_at_empirical_equals_negative_entropy(self, rng):
        X = rng.integers(0, 2, size=(200, 3))
        q = empirical_distribution(Dataset(X)).probs
        assert np.all(q > 0)
        model = TabularModel(-np.log(q))
        data = Dataset(X)
        assert exact_loglik(model, data) == pytest.approx(q @ np.log(q), abs=1e-12)
        np.testing.assert_allclose(exact_loglik_grad(model, data), 0.0, atol=1e-12)

    def test_loglik_gradient_fd(self, rng):
        m = IsingModel(random_sym(rng, 5))
        data = Dataset(rng.integers(0, 2, size=(30, 5)))
        fd = fd_gradient(lambda t: exact_loglik(m.with_params(t), data), m.params)
        np.testing.assert_allclose(exact_loglik_grad(m, data), fd, rtol=1e-6, atol=1e-9)


class TestFlowMatrix:
    def test_uniform_is_adjacency(self):
        fm = build_flow_matrix(TabularModel(np.zeros(8)))
        off = fm.gamma - np.diag(np.diag(fm.gamma))
        np.testing.assert_array_equal(off, fm.connectivity)

    def test_structure(self, rng):
        m = IsingModel(random_sym(rng, 6))
        G = build_flow_matrix(m).gamma
        p = model_probs(m)
        assert np.max(np.abs(G.sum(axis=0))) < 1e-12
        assert np.all(G - np.diag(np.diag(G)) >= 0)
        balance = G * p[None, :] - (G * p[None, :]).T
        assert np.max(np.abs(balance)) < 1e-12
        assert np.max(np.abs(G @ p)) < 1e-12

    def test_constant_shift_invariance(self, rng):
        E = rng.normal(size=16)
        G1 = build_flow_matrix(TabularModel(E)).gamma
        G2 = build_flow_matrix(TabularModel(E + 7.5)).gamma
        np.testing.assert_allclose(G1, G2, rtol=1e-12, atol=1e-14)

    def test_spectrum(self, rng):
        m = IsingModel(random_sym(rng, 5))
        fm = build_flow_matrix(m)
        eig = spectrum(fm)
        assert abs(eig.eigenvalues[0]) < 1e-10
        assert np.all(eig.eigenvalues[1:] < 0)
        stat = eig.v_diag * eig.vectors[:, 0]
        np.testing.assert_allclose(stat / stat.sum(), model_probs(m), atol=1e-10)

    def test_cap(self):
        with pytest.raises(ValueError):
            build_flow_matrix(IsingModel.zeros(13))


class TestEvolve:
    def test_time_zero(self, rng):
        fm = build_flow_matrix(IsingModel(random_sym(rng, 3)))
        p0 = rng.dirichlet(np.ones(8))
        np.testing.assert_array_equal(evolve(fm, p0, 0.0), p0)

    def test_matches_expm(self, rng):
        fm = build_flow_matrix(IsingModel(random_sym(rng, 3)))
        p0 = rng.dirichlet(np.ones(8))
        np.testing.assert_allclose(evolve(fm, p0, 0.7), expm(0.7 * fm.gamma) @ p0, atol=1e-12)

    def test_mass_conserved(self, rng):
        fm = build_flow_matrix(IsingModel(random_sym(rng, 4)))
        p0 = np.zeros(16)
        p0[3] = 1.0
        for t in (0.1, 1.0, 10.0):
            assert abs(evolve(fm, p0, t).sum() - 1.0) < 1e-12

    def test_long_time_limit(self, rng):
        m = IsingModel(random_sym(rng, 4))
        p0 = np.zeros(16)
        p0[0] = 1.0
        np.testing.assert_allclose(evolve(build_flow_matrix(m), p0, 1e6), model_probs(m),
                                   atol=1e-8)

    def test_negative_time(self, rng):
        with pytest.raises(ValueError):
            evolve(build_flow_matrix(IsingModel.zeros(2)), np.full(4, 0.25), -1.0)


class TestKlFlow:
    def test_identity_and_rate(self, rng):
        for _ in range(20):
            d = int(rng.integers(2, 9))
            m = IsingModel(random_sym(rng, d))
            data = Dataset(rng.integers(0, 2, size=(int(rng.integers(1, 6)), d)))
            r = kl_flow_check(m, data)
            assert r.flow_residual < 1e-12
            if r.K_strict > 0:
                assert r.rate_rel_residual < 1e-4

    def test_full_support_zero(self, rng):
        m = IsingModel(random_sym(rng, 3))
        data = Dataset(all_states(3), weights=model_probs(m))
        assert kl_flow_check(m, data).K_strict == 0.0


class TestSpectralBound:
    def test_bound_holds(self, rng):
        for _ in range(20):
            m = IsingModel(random_sym(rng, 8))
            r = spectral_bound(m, sparse_data(rng, 8, 3))
            assert r.bound_holds
            assert r.lambda2_bound_holds

    def test_single_state(self, rng):
        m = IsingModel(random_sym(rng, 4))
        x = int(np.argmax(model_probs(m)))
        r = spectral_bound(m, Dataset(all_states(4)[[x]]))
        assert r.bound.shape == (1,) and r.bound_holds

    def test_connected_data_rejected(self):
        with pytest.raises(ValueError, match="connected"):
            spectral_bound(IsingModel.zeros(3), Dataset(np.array([[0, 0, 0], [1, 0, 0]])))


class TestScoreMatchingLimit:
    def test_quadratic_limit(self):
        rows = sm_limit_check(GaussianModel(np.eye(2)), [[1.0, 1.0]], [0.4, 0.2, 0.1])
        assert all(r["sm"] == pytest.approx(-1.0) for r in rows)
        assert rows[-1]["error"] < 1e-3
        for a, b in zip(rows, rows[1:]):
            assert 3.0 <= a["error"] / b["error"] <= 5.0

    def test_constant_energy(self):
        for eps in (0.3, 0.1):
            (r,) = sm_limit_check(GaussianModel(np.zeros((2, 2))), [[0.5, -1.0]], [eps])
            assert r["K_mpf"] == pytest.approx(eps ** 2, rel=1e-14)
            assert r["rescaled"] == 0.0

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            sm_limit_check(GaussianModel(np.eye(4)), np.zeros((1, 4)), [0.1])


class TestFiniteDifferences:
    def test_quadratic_gradient(self, rng):
        A = random_sym(rng, 4)
        th = rng.normal(size=4)
        np.testing.assert_allclose(fd_gradient(lambda t: t @ A @ t, th), 2 * A @ th, atol=1e-8)

    def test_ising_mpf_convex(self, rng):
        for _ in range(20):
            d = 4
            data = Dataset(rng.integers(0, 2, size=(15, d)))
            th = IsingModel(random_sym(rng, d)).params
            assert hessian_min_eig(lambda t: ising_mpf_params(t, data, d)[1], th) >= -1e-8

    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            fd_gradient(lambda t: np.inf if t[0] > 0 else 0.0, np.array([0.0]))
