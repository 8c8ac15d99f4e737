"""Energy models with parameter gradients.

Every model is an immutable value exposing a flat parameter vector ``params``
so the optimizers can work on it, and a ``with_params`` constructor for the
inverse direction. Packing orders:

* Ising: upper triangle of ``J`` including the diagonal, row-major.
* RBM: ``W`` row-major (hidden-major).
* ICA: ``J`` row-major.
"""

from __future__ import annotations

import json
import os

import numpy as np
from scipy.special import expit

from .statespace import MAX_ENUM_DIM, encode_state


class EnergyModel:
    """Interface shared by all energies ``E(x; theta)``.

    Subclasses implement ``energy``, ``param_grad``, ``params`` and
    ``with_params``. Continuous models additionally implement ``x_grad``.
    """

    kind = "abstract"
    binary = True

    @property
    def d(self):
        raise NotImplementedError

    @property
    def params(self):
        raise NotImplementedError

    @property
    def n_params(self):
        return self.params.size

    def with_params(self, theta):
        raise NotImplementedError

    def energy(self, X):
        raise NotImplementedError

    def param_grad(self, X):
        """dE/dtheta for each row of ``X``, shape ``(n, n_params)``."""
        raise NotImplementedError

    def _rows(self, X):
        X = np.asarray(X)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.d:
            raise ValueError(f"state dimension {X.shape[1]} != model dimension {self.d}")
        return X, single


def _triu_index(d):
    return np.triu_indices(d)


class IsingModel(EnergyModel):
    """``E(x) = x^T J x`` over ``x in {0,1}^d`` with symmetric ``J``.

    The diagonal of ``J`` acts as the bias (since ``x_i^2 = x_i``).
    """

    kind = "ising"

    def __init__(self, J):
        J = np.array(J, dtype=np.float64)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be square")
        if not np.array_equal(J, J.T):
            raise ValueError("J must be symmetric; use IsingModel.from_asymmetric")
        J.setflags(write=False)
        self._J = J

    @classmethod
    def from_asymmetric(cls, Jp):
        Jp = np.asarray(Jp, dtype=np.float64)
        return cls(0.5 * (Jp + Jp.T))

    @classmethod
    def from_params(cls, d, theta):
        theta = np.asarray(theta, dtype=np.float64)
        iu = _triu_index(d)
        if theta.size != iu[0].size:
            raise ValueError(f"expected {iu[0].size} parameters for d={d}")
        J = np.zeros((d, d))
        J[iu] = theta
        J = J + np.triu(J, 1).T
        return cls(J)

    @classmethod
    def zeros(cls, d):
        return cls(np.zeros((d, d)))

    @property
    def J(self):
        return self._J

    @property
    def d(self):
        return self._J.shape[0]

    @property
    def params(self):
        return self._J[_triu_index(self.d)].copy()

    def with_params(self, theta):
        return IsingModel.from_params(self.d, theta)

    def energy(self, X):
        X, single = self._rows(X)
        Xf = X.astype(np.float64)
        E = np.einsum("ni,ij,nj->n", Xf, self._J, Xf)
        return E[0] if single else E

    def features(self, X):
        """Sufficient statistics: ``E = features(x) @ params``."""
        X, single = self._rows(X)
        Xf = X.astype(np.float64)
        iu = _triu_index(self.d)
        outer = Xf[:, iu[0]] * Xf[:, iu[1]]
        coef = np.where(iu[0] == iu[1], 1.0, 2.0)
        F = outer * coef
        return F[0] if single else F

    def param_grad(self, X):
        return self.features(X)

    def flip_energy_delta(self, X):
        """``E(x with x_n=1) - E(x with x_n=0)`` for every row and unit, shape ``(n, d)``."""
        X, _ = self._rows(X)
        Xf = X.astype(np.float64)
        J = self._J
        diag = np.diag(J)
        # 2 * sum_{i != n} J_in x_i + J_nn
        return 2.0 * (Xf @ J - Xf * diag) + diag


def ising_energy(J, x):
    """Energy and gradient w.r.t. the unique (upper-triangle) couplings.

    Returns ``(E, dE)`` where ``dE`` follows the :class:`IsingModel` packing.
    """
    model = IsingModel(J)
    return model.energy(x), model.param_grad(x)


class RbmModel(EnergyModel):
    """RBM with hidden units summed out: ``E(v) = -sum_i log(1 + exp(-W_i v))``.

    The joint energy consistent with this marginal is ``E(v, h) = h^T W v``.
    """

    kind = "rbm"

    def __init__(self, W):
        W = np.array(W, dtype=np.float64)
        if W.ndim != 2:
            raise ValueError("W must be a (n_hidden, d) matrix")
        if not np.all(np.isfinite(W)):
            raise ValueError("W must be finite")
        W.setflags(write=False)
        self._W = W

    @property
    def W(self):
        return self._W

    @property
    def d(self):
        return self._W.shape[1]

    @property
    def n_hidden(self):
        return self._W.shape[0]

    @property
    def params(self):
        return self._W.ravel().copy()

    def with_params(self, theta):
        return RbmModel(np.asarray(theta, dtype=np.float64).reshape(self._W.shape))

    def energy(self, X):
        X, single = self._rows(X)
        A = X.astype(np.float64) @ self._W.T
        E = -np.logaddexp(0.0, -A).sum(axis=1)
        return E[0] if single else E

    def param_grad(self, X):
        X, single = self._rows(X)
        Xf = X.astype(np.float64)
        S = expit(-(Xf @ self._W.T))
        G = (S[:, :, None] * Xf[:, None, :]).reshape(len(Xf), -1)
        return G[0] if single else G

    def hidden_prob(self, V):
        """``p(h_i = 1 | v) = sigmoid(-W_i v)``."""
        return expit(-(np.atleast_2d(V).astype(np.float64) @ self._W.T))

    def visible_prob(self, H):
        """``p(v_j = 1 | h) = sigmoid(-(h^T W)_j)``."""
        return expit(-(np.atleast_2d(H).astype(np.float64) @ self._W))


def rbm_energy(W, v):
    """Marginal RBM energy of ``v`` and its gradient w.r.t. ``W`` (same shape as ``W``)."""
    model = RbmModel(W)
    return model.energy(v), model.param_grad(v).reshape(model.W.shape)


class IcaModel(EnergyModel):
    """Laplace-prior ICA: ``E(x) = sum_k |J_k x|`` over ``x in R^K``.

    Normalizer is ``2^K |det J|^{-1}``, so the likelihood is analytic.
    ``sign(0)`` is taken as 0 at the kinks.
    """

    kind = "ica"
    binary = False

    def __init__(self, J):
        J = np.array(J, dtype=np.float64)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be square")
        J.setflags(write=False)
        self._J = J

    @property
    def J(self):
        return self._J

    @property
    def d(self):
        return self._J.shape[0]

    @property
    def params(self):
        return self._J.ravel().copy()

    def with_params(self, theta):
        return IcaModel(np.asarray(theta, dtype=np.float64).reshape(self._J.shape))

    def energy(self, X):
        X, single = self._rows(X)
        E = np.abs(X @ self._J.T).sum(axis=1)
        return E[0] if single else E

    def param_grad(self, X):
        X, single = self._rows(X)
        S = np.sign(X @ self._J.T)
        G = (S[:, :, None] * X[:, None, :]).reshape(len(X), -1)
        return G[0] if single else G

    def x_grad(self, X):
        X, single = self._rows(X)
        G = np.sign(X @ self._J.T) @ self._J
        return G[0] if single else G

    def loglik(self, data):
        """Mean exact log-likelihood and its gradient w.r.t. ``J`` (matrix-shaped)."""
        X = data.rows if hasattr(data, "rows") else np.atleast_2d(data)
        w = data.row_weights() if hasattr(data, "row_weights") else np.full(len(X), 1 / len(X))
        sign, logdet = np.linalg.slogdet(self._J)
        if sign == 0 or not np.isfinite(logdet):
            raise np.linalg.LinAlgError("J is singular")
        K = self.d
        Y = X @ self._J.T
        L = -(w @ np.abs(Y).sum(axis=1)) - K * np.log(2.0) + logdet
        grad = -(np.sign(Y) * w[:, None]).T @ X + np.linalg.inv(self._J).T
        return L, grad


def ica_energy(J, x):
    """``(E, dE/dJ, dE/dx)`` for a single ICA state."""
    model = IcaModel(J)
    return model.energy(x), model.param_grad(x).reshape(model.J.shape), model.x_grad(x)


def ica_loglik(J, data):
    return IcaModel(J).loglik(data)


class GaussianModel(EnergyModel):
    """Smooth quadratic energy ``E(x) = 0.5 x^T P x``; used for score-matching checks."""

    kind = "gaussian"
    binary = False

    def __init__(self, precision):
        P = np.array(precision, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or not np.allclose(P, P.T):
            raise ValueError("precision must be a symmetric square matrix")
        P.setflags(write=False)
        self._P = P

    @property
    def precision(self):
        return self._P

    @property
    def d(self):
        return self._P.shape[0]

    @property
    def params(self):
        return self._P.ravel().copy()

    def with_params(self, theta):
        P = np.asarray(theta, dtype=np.float64).reshape(self._P.shape)
        return GaussianModel(0.5 * (P + P.T))

    def energy(self, X):
        X, single = self._rows(X)
        E = 0.5 * np.einsum("ni,ij,nj->n", X, self._P, X)
        return E[0] if single else E

    def param_grad(self, X):
        X, single = self._rows(X)
        G = 0.5 * (X[:, :, None] * X[:, None, :]).reshape(len(X), -1)
        return G[0] if single else G

    def x_grad(self, X):
        X, single = self._rows(X)
        G = X @ self._P
        return G[0] if single else G

    def laplacian(self, X):
        X, single = self._rows(X)
        lap = np.full(len(X), np.trace(self._P))
        return lap[0] if single else lap


class TabularModel(EnergyModel):
    """Free-form energy table over all ``2**d`` states (oracle use only)."""

    kind = "tabular"

    def __init__(self, table):
        t = np.array(table, dtype=np.float64)
        if t.ndim != 1 or t.size == 0 or t.size & (t.size - 1):
            raise ValueError("table size must be a power of two")
        d = t.size.bit_length() - 1
        if d > MAX_ENUM_DIM:
            raise ValueError(f"d={d} exceeds the enumeration cap")
        t.setflags(write=False)
        self._table = t
        self._d = d

    @property
    def table(self):
        return self._table

    @property
    def d(self):
        return self._d

    @property
    def params(self):
        return self._table.copy()

    def with_params(self, theta):
        return TabularModel(theta)

    def energy(self, X):
        X, single = self._rows(X)
        E = self._table[encode_state(X)]
        return E[0] if single else E

    def param_grad(self, X):
        X, single = self._rows(X)
        G = np.zeros((len(X), self._table.size))
        G[np.arange(len(X)), encode_state(X)] = 1.0
        return G[0] if single else G


def tabular_energy(table, x):
    return TabularModel(table).energy(x)


# ---------------------------------------------------------------------------
# parameter files

def save_params(path, model, **extra):
    """Write model parameters as JSON (full ``repr`` precision)."""
    if isinstance(model, IsingModel):
        obj = {"model": "ising", "d": model.d, "J": model.J.tolist()}
    elif isinstance(model, RbmModel):
        obj = {"model": "rbm", "d": model.d, "W": model.W.tolist()}
    elif isinstance(model, IcaModel):
        obj = {"model": "ica", "d": model.d, "J": model.J.tolist()}
    elif hasattr(model, "to_json_dict"):
        obj = model.to_json_dict()
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    obj.update(extra)
    with open(os.fspath(path), "w") as fh:
        json.dump(obj, fh, indent=1)


def load_params(path):
    with open(os.fspath(path)) as fh:
        obj = json.load(fh)
    return params_from_dict(obj)


def params_from_dict(obj):
    kind = obj.get("model")
    if kind == "ising":
        model = IsingModel(obj["J"])
    elif kind == "rbm":
        model = RbmModel(obj["W"])
    elif kind == "ica":
        model = IcaModel(obj["J"])
    elif kind == "hopfield":
        from .hopfield import HopfieldNet
        model = HopfieldNet(obj["J"], obj["theta"])
        return model
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    if "d" in obj and obj["d"] != model.d:
        raise ValueError(f"declared d={obj['d']} does not match matrix shape")
    return model
