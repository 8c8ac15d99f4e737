"""Hopfield networks: energy, ascending-order dynamics, training rules and experiments.

States are ``x in {0,1}^n``. The energy is ``E(x) = -x^T J x / 2 + theta^T x``
with ``J`` symmetric and zero on the diagonal, and the dynamics set
``x_i = H(J_i x - theta_i)`` with ``H(r) = 1`` iff ``r > 0``.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np

from .flow import ClampWarning, _clamped_exp
from .models import EnergyModel, IsingModel
from .optimize import OptimizerConfig, lbfgs_minimize
from .statespace import Dataset

logger = logging.getLogger(__name__)

METHODS = ("mpf", "opr", "per")


class HopfieldNet(EnergyModel):
    """Symmetric zero-diagonal weights ``J`` and thresholds ``theta``.

    Flat parameters are the strict upper triangle of ``J`` (row-major)
    followed by ``theta``.
    """

    kind = "hopfield"

    def __init__(self, J, theta=None):
        J = np.array(J, dtype=np.float64)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be square")
        if not np.array_equal(J, J.T):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(J) != 0):
            raise ValueError("J must have a zero diagonal")
        n = J.shape[0]
        theta = np.zeros(n) if theta is None else np.array(theta, dtype=np.float64)
        if theta.shape != (n,):
            raise ValueError(f"theta must have length {n}")
        J.setflags(write=False)
        theta.setflags(write=False)
        self._J, self._theta = J, theta

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)))

    @classmethod
    def from_params(cls, n, params):
        params = np.asarray(params, dtype=np.float64)
        iu = np.triu_indices(n, 1)
        if params.shape != (len(iu[0]) + n,):
            raise ValueError("parameter vector has the wrong length")
        J = np.zeros((n, n))
        J[iu] = params[:len(iu[0])]
        J = J + J.T
        return cls(J, params[len(iu[0]):])

    @property
    def J(self):
        return self._J

    @property
    def theta(self):
        return self._theta

    @property
    def n(self):
        return self._J.shape[0]

    @property
    def d(self):
        return self.n

    @property
    def params(self):
        return np.concatenate([self._J[np.triu_indices(self.n, 1)], self._theta])

    def with_params(self, theta):
        return HopfieldNet.from_params(self.n, theta)

    def energy(self, X):
        return hopfield_energy(self, X)

    def param_grad(self, X):
        X, single = self._rows(X)
        Xf = X.astype(np.float64)
        iu = np.triu_indices(self.n, 1)
        G = np.concatenate([-(Xf[:, iu[0]] * Xf[:, iu[1]]), Xf], axis=1)
        return G[0] if single else G

    def local_fields(self, X):
        """``J_i x - theta_i`` for every unit."""
        X, single = self._rows(X)
        R = X.astype(np.float64) @ self._J - self._theta
        return R[0] if single else R

    def to_ising(self):
        """The equivalent Ising model: ``-J/2`` off the diagonal, ``theta`` on it."""
        J = -0.5 * self._J
        J[np.diag_indices(self.n)] = self._theta
        return IsingModel(J)

    def to_json_dict(self):
        return {"model": "hopfield", "d": self.n, "J": self._J.tolist(),
                "theta": self._theta.tolist()}

    def __eq__(self, other):
        if not isinstance(other, HopfieldNet):
            return NotImplemented
        return np.array_equal(self._J, other._J) and np.array_equal(self._theta, other._theta)

    __hash__ = None


def hopfield_energy(net, x):
    X, single = net._rows(x)
    Xf = X.astype(np.float64)
    E = -0.5 * np.einsum("ni,ij,nj->n", Xf, net.J, Xf) + Xf @ net.theta
    return E[0] if single else E


def _as_rows(patterns, n=None):
    X = patterns.rows if isinstance(patterns, Dataset) else np.atleast_2d(np.asarray(patterns))
    if n is not None and X.shape[1] != n:
        raise ValueError(f"pattern width {X.shape[1]} != network size {n}")
    if not np.all((X == 0) | (X == 1)):
        raise ValueError("patterns must be binary")
    return X.astype(np.int8)


# ---------------------------------------------------------------------------
# dynamics

def dynamics_step(net, x):
    """One ascending-order sweep; rows of a 2-D ``x`` are updated independently."""
    X, single = net._rows(x)
    X = X.astype(np.float64)
    for i in range(net.n):
        X[:, i] = (X @ net.J[:, i] - net.theta[i]) > 0
    X = X.astype(np.int8)
    return X[0] if single else X


def converge(net, x, max_sweeps=100):
    """Sweep until nothing changes.

    Returns
    -------
    x : ndarray
    sweeps : int
        Sweeps performed, including the final unchanged one.
    converged : bool
        Whether every row reached a fixed point within ``max_sweeps``.
    """
    X, single = net._rows(x)
    X = X.astype(np.int8)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        nxt = dynamics_step(net, X)
        sweeps += 1
        if np.array_equal(nxt, X):
            converged = True
            break
        X = nxt
    return (X[0] if single else X), sweeps, converged


def is_fixed_point(net, x):
    """Per row: every unit already satisfies ``x_i = H(J_i x - theta_i)``."""
    X, single = net._rows(x)
    ok = np.all((net.local_fields(X) > 0) == (X == 1), axis=1)
    return bool(ok[0]) if single else ok


def fixed_point_fraction(net, patterns):
    return float(np.mean(is_fixed_point(net, _as_rows(patterns, net.n))))


# ---------------------------------------------------------------------------
# MPF storage objective

def hopfield_mpf_objective(net, patterns):
    """Sum over patterns and single-bit neighbors of ``exp((E_x - E_x') / 2)``.

    Returns
    -------
    K : float
    grad_J : ndarray of shape (n, n)
        Symmetric with zero diagonal; entry ``(i, j)`` is the derivative with
        respect to the shared weight ``J_ij = J_ji``.
    grad_theta : ndarray of shape (n,)
    """
    X = _as_rows(patterns, net.n).astype(np.float64)
    D = 1.0 - 2.0 * X
    T = _clamped_exp(0.5 * (X @ net.J - net.theta) * D)
    TD = T * D
    G = 0.5 * TD.T @ X
    grad_J = G + G.T
    np.fill_diagonal(grad_J, 0.0)
    return float(T.sum()), grad_J, -0.5 * TD.sum(axis=0)


def hopfield_mpf_params(params, patterns, n):
    """:func:`hopfield_mpf_objective` over the flat parameter vector."""
    net = HopfieldNet.from_params(n, params)
    K, gJ, gt = hopfield_mpf_objective(net, patterns)
    return K, np.concatenate([gJ[np.triu_indices(n, 1)], gt])


def online_mpf_update(net, x, eta):
    """One steepest-descent step on the single-pattern objective."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    _, gJ, gt = hopfield_mpf_objective(net, _as_rows(x, net.n))
    return HopfieldNet(net.J - eta * gJ, net.theta - eta * gt)


def train_mpf(patterns, cfg=None, net0=None):
    """Minimize the storage objective with L-BFGS.

    Defaults stop at ``max|grad| < 1e-6`` or 500 iterations. Returns the net
    and the :class:`OptimizeResult`.
    """
    X = _as_rows(patterns)
    n = X.shape[1]
    cfg = cfg or OptimizerConfig(max_iters=500, grad_tol=1e-6)
    net0 = net0 or HopfieldNet.zeros(n)
    with warnings.catch_warnings():
        # overshooting line-search trials on separable sets hit the clamp and are rejected
        warnings.simplefilter("ignore", ClampWarning)
        res = lbfgs_minimize(lambda p: hopfield_mpf_params(p, X, n), net0.params, cfg)
    return HopfieldNet.from_params(n, res.x), res


# ---------------------------------------------------------------------------
# classical rules

def opr_train(patterns):
    """Outer-product rule: ``J = sum xi xi^T`` off the diagonal, ``theta = 0``."""
    X = _as_rows(patterns)
    S = 2.0 * X - 1.0
    J = S.T @ S
    np.fill_diagonal(J, 0.0)
    return HopfieldNet(J)


def per_train(patterns, eta=1.0, max_epochs=1000, net0=None):
    """Symmetrized perceptron rule.

    For each pattern in turn, every unit violating its fixed-point condition
    contributes ``eta * xi_i * x_j`` to row ``i``; the contributions are
    averaged with their transpose so ``J`` stays symmetric, and
    ``theta_i -= eta * xi_i``.

    Returns
    -------
    net : HopfieldNet
    converged : bool
        True when a full epoch produced no violations.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    X = _as_rows(patterns)
    n = X.shape[1]
    net0 = net0 or HopfieldNet.zeros(n)
    J = net0.J.copy()
    theta = net0.theta.copy()
    Xf = X.astype(np.float64)
    S = 2.0 * Xf - 1.0
    for _ in range(max_epochs):
        clean = True
        for x, xi in zip(Xf, S):
            v = ((x @ J - theta) > 0) != (x == 1)
            if not v.any():
                continue
            clean = False
            u = eta * v * xi
            R = np.outer(u, x)
            J += 0.5 * (R + R.T)
            np.fill_diagonal(J, 0.0)
            theta -= u
        if clean:
            return HopfieldNet(J, theta), True
    return HopfieldNet(J, theta), False


def train(method, patterns, **kwargs):
    """Train by name; returns a :class:`HopfieldNet`."""
    if method == "mpf":
        return train_mpf(patterns, **kwargs)[0]
    if method == "opr":
        return opr_train(patterns)
    if method == "per":
        return per_train(patterns, **kwargs)[0]
    raise ValueError(f"unknown Hopfield training method {method!r}")


# ---------------------------------------------------------------------------
# experiments

def random_patterns(n, m, rng):
    return rng.integers(0, 2, size=(m, n)).astype(np.int8)


def corrupt(X, bits, rng):
    """Flip ``bits`` distinct random units in every row."""
    X = np.array(X, dtype=np.int8, copy=True)
    for row in X:
        idx = rng.choice(X.shape[1], size=bits, replace=False)
        row[idx] ^= 1
    return X


def _summary(values):
    values = np.asarray(values, dtype=np.float64)
    se = values.std(ddof=1) / np.sqrt(len(values)) if len(values) > 1 else 0.0
    return float(values.mean()), float(se)


def capacity_experiment(n, m_values, trials, methods=METHODS, rng=None):
    """Mean fraction of random patterns that are exact fixed points after training.

    Each trial draws a fresh pattern set from a child generator.

    Returns
    -------
    list of dict
        Keys ``method, n, m, mean, stderr, trials``, sorted by method then ``m``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    seeds = rng.spawn(trials)
    rows = []
    for m in m_values:
        scores = {meth: [] for meth in methods}
        for child in seeds:
            X = random_patterns(n, m, child)
            for meth in methods:
                scores[meth].append(fixed_point_fraction(train(meth, X), X))
        for meth in methods:
            mean, se = _summary(scores[meth])
            rows.append({"method": meth, "n": n, "m": m, "mean": mean,
                         "stderr": se, "trials": trials})
    return sorted(rows, key=lambda r: (r["method"], r["m"]))


def denoise_experiment(n, m, corruption_bits_list, trials, methods=METHODS, rng=None,
                       max_sweeps=100):
    """Fraction of corrupted stored patterns that relax exactly back to the original.

    Returns
    -------
    list of dict
        Keys ``method, n, m, corruption_bits, mean, stderr, trials``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    for bits in corruption_bits_list:
        if not 0 <= bits < n / 2:
            raise ValueError("corruption must be below n/2 bits")
    scores = {(meth, b): [] for meth in methods for b in corruption_bits_list}
    for child in rng.spawn(trials):
        X = random_patterns(n, m, child)
        nets = {meth: train(meth, X) for meth in methods}
        for bits in corruption_bits_list:
            Xc = corrupt(X, bits, child)
            for meth in methods:
                out, _, _ = converge(nets[meth], Xc, max_sweeps)
                scores[(meth, bits)].append(np.mean(np.all(out == X, axis=1)))
    rows = []
    for (meth, bits), vals in scores.items():
        mean, se = _summary(vals)
        rows.append({"method": meth, "n": n, "m": m, "corruption_bits": bits,
                     "mean": mean, "stderr": se, "trials": trials})
    return sorted(rows, key=lambda r: (r["method"], r["corruption_bits"]))


def corrupted_storage_experiment(n, templates, copies, corruption, trials=1, rng=None,
                                 method="mpf"):
    """Train on corrupted copies only and score the hidden templates.

    ``corruption`` is the fraction of bits flipped in every copy.

    Returns
    -------
    list of dict
        Keys ``method, n, m, corruption, mean`` (fraction of templates that
        are fixed points), ``recovered`` (fraction recovered from a corrupted
        copy by the dynamics), ``stderr`` and ``trials``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    bits = int(round(corruption * n))
    fixed, recovered = [], []
    for child in rng.spawn(trials):
        T = random_patterns(n, templates, child)
        train_set = corrupt(np.repeat(T, copies, axis=0), bits, child)
        net = train(method, train_set)
        fixed.append(fixed_point_fraction(net, T))
        out, _, _ = converge(net, corrupt(T, bits, child))
        recovered.append(np.mean(np.all(out == T, axis=1)))
    mean, se = _summary(fixed)
    return [{"method": method, "n": n, "m": templates, "corruption": corruption,
             "mean": mean, "recovered": float(np.mean(recovered)), "stderr": se,
             "trials": trials}]
