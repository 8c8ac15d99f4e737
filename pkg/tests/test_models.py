import itertools

import numpy as np
import pytest

from mpflearn.models import (GaussianModel, IcaModel, IsingModel, RbmModel, TabularModel,
                             ica_energy, ica_loglik, ising_energy, load_params, rbm_energy,
                             save_params, tabular_energy)
from mpflearn.oracle import fd_gradient
from mpflearn.statespace import Dataset, all_states

from conftest import random_sym


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


class TestIsing:
    def test_quadratic_form(self):
        E, _ = ising_energy([[1, 2], [2, 3]], [1, 1])
        assert E == 8

    def test_zero_state(self, rng):
        assert IsingModel(random_sym(rng, 4)).energy(np.zeros(4)) == 0

    def test_gradient_fd(self, rng):
        for _ in range(20):
            m = IsingModel(random_sym(rng, 5))
            x = rng.integers(0, 2, size=5)
            fd = fd_gradient(lambda t: m.with_params(t).energy(x), m.params)
            assert rel_err(m.param_grad(x), fd) < 1e-7

    def test_transpose_invariance(self, rng):
        Jp = rng.normal(size=(4, 4))
        X = all_states(4)
        np.testing.assert_allclose(IsingModel.from_asymmetric(Jp).energy(X),
                                   IsingModel.from_asymmetric(Jp.T).energy(X))

    def test_requires_symmetric(self):
        with pytest.raises(ValueError):
            IsingModel([[0, 1], [0, 0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            IsingModel.zeros(3).energy([0, 1])

    def test_params_round_trip(self, rng):
        m = IsingModel(random_sym(rng, 6))
        assert np.array_equal(IsingModel.from_params(6, m.params).J, m.J)

    def test_flip_delta(self, rng):
        m = IsingModel(random_sym(rng, 5))
        X = rng.integers(0, 2, size=(7, 5))
        delta = m.flip_energy_delta(X)
        for n in range(5):
            X1, X0 = X.copy(), X.copy()
            X1[:, n], X0[:, n] = 1, 0
            np.testing.assert_allclose(delta[:, n], m.energy(X1) - m.energy(X0), atol=1e-12)


class TestRbm:
    def test_zero_weights(self):
        E, _ = rbm_energy(np.zeros((3, 5)), np.ones(5))
        assert E == pytest.approx(-3 * np.log(2), abs=1e-12)

    def test_marginalization_identity(self, rng):
        W = rng.normal(size=(3, 4))
        H = np.array(list(itertools.product([0, 1], repeat=3)))
        for v in all_states(4):
            joint = np.exp(-(H @ W @ v)).sum()
            assert np.exp(-RbmModel(W).energy(v)) == pytest.approx(joint, rel=1e-12)

    def test_gradient_fd(self, rng):
        for _ in range(20):
            m = RbmModel(rng.normal(size=(3, 5)))
            v = rng.integers(0, 2, size=5)
            fd = fd_gradient(lambda t: m.with_params(t).energy(v), m.params)
            assert rel_err(m.param_grad(v), fd) < 1e-7

    def test_conditionals(self, rng):
        m = RbmModel(rng.normal(size=(2, 3)))
        v = np.array([1, 0, 1])
        H = np.array(list(itertools.product([0, 1], repeat=2)))
        p = np.exp(-(H @ m.W @ v))
        p /= p.sum()
        np.testing.assert_allclose(np.ravel(m.hidden_prob(v)), H.T @ p, atol=1e-12)


class TestIca:
    def test_sum_of_absolutes(self):
        E, _, _ = ica_energy(np.eye(2), [3.0, -4.0])
        assert E == 7

    def test_zero_state(self):
        E, gJ, gx = ica_energy(np.eye(2), [0.0, 0.0])
        assert E == 0 and not gJ.any() and not gx.any()

    def test_one_dimensional_laplace(self):
        L, _ = ica_loglik([[2.0]], Dataset(np.array([[0.5]]), kind="continuous"))
        assert L == pytest.approx(-1.0, abs=1e-12)

    def test_determinant_scaling(self):
        data = Dataset(np.zeros((3, 2)), kind="continuous")
        L1, _ = ica_loglik(np.eye(2), data)
        L2, _ = ica_loglik(3.0 * np.eye(2), data)
        assert L2 - L1 == pytest.approx(2 * np.log(3.0), abs=1e-12)

    def test_gradients_fd(self, rng):
        for _ in range(20):
            J = rng.normal(size=(3, 3)) + 2 * np.eye(3)
            x = rng.normal(size=3)
            if np.min(np.abs(J @ x)) < 1e-3:
                continue
            m = IcaModel(J)
            fd = fd_gradient(lambda t: m.with_params(t).energy(x), m.params)
            assert rel_err(m.param_grad(x), fd) < 1e-6
            fdx = fd_gradient(lambda y: m.energy(y), x)
            assert rel_err(m.x_grad(x), fdx) < 1e-6
            data = Dataset(rng.laplace(size=(30, 3)), kind="continuous")
            _, G = m.loglik(data)
            fd = fd_gradient(lambda t: m.with_params(t).loglik(data)[0], m.params)
            assert rel_err(G.ravel(), fd) < 1e-6

    def test_singular(self):
        with pytest.raises(np.linalg.LinAlgError):
            ica_loglik(np.zeros((2, 2)), Dataset(np.zeros((1, 2)), kind="continuous"))


class TestTabular:
    def test_zeros(self):
        assert not TabularModel(np.zeros(8)).energy(all_states(3)).any()

    def test_matches_ising(self, rng):
        m = IsingModel(random_sym(rng, 6))
        S = all_states(6)
        table = m.energy(S)
        np.testing.assert_array_equal(tabular_energy(table, S), table)

    def test_point_update(self):
        t = np.zeros(8)
        t[5] = 1.0
        E = TabularModel(t).energy(all_states(3))
        assert np.count_nonzero(E) == 1 and E[5] == 1.0

    def test_size_not_power_of_two(self):
        with pytest.raises(ValueError):
            TabularModel(np.zeros(6))


class TestGaussian:
    def test_derivatives(self, rng):
        A = rng.normal(size=(3, 3))
        m = GaussianModel(A @ A.T + np.eye(3))
        x = rng.normal(size=3)
        np.testing.assert_allclose(m.x_grad(x), fd_gradient(m.energy, x), rtol=1e-7)
        assert m.laplacian(x) == pytest.approx(np.trace(m.precision))


class TestParamFiles:
    @pytest.mark.parametrize("model", [
        IsingModel([[0.1, 1 / 3], [1 / 3, -2.0]]),
        RbmModel([[0.1, np.pi, -1e-17]]),
        IcaModel([[1.0, 2.0], [0.5, np.e]]),
    ])
    def test_round_trip(self, tmp_path, model):
        save_params(tmp_path / "p.json", model)
        back = load_params(tmp_path / "p.json")
        assert type(back) is type(model)
        np.testing.assert_array_equal(back.params, model.params)

    def test_unknown_kind(self, tmp_path):
        (tmp_path / "p.json").write_text('{"model": "dbn"}')
        with pytest.raises(ValueError):
            load_params(tmp_path / "p.json")
