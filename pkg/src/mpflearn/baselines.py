"""Competing estimators: exact maximum likelihood, pseudolikelihood, contrastive
divergence, and the score-matching objective."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit, logsumexp

from .models import IsingModel, RbmModel, TabularModel
from .optimize import OptimizerConfig, SgdConfig, lbfgs_minimize, sgd_anneal
from .samplers import gibbs_sweep, rbm_block_gibbs
from .statespace import MAX_ENUM_DIM, all_states, encode_state

logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    """A fitted model with the optimizer outcome.

    ``diverged`` is set when the likelihood has no finite maximizer in the
    model family (parameters ran off towards infinity).
    """

    model: object
    result: object = None
    diverged: bool = False


# ---------------------------------------------------------------------------
# exact maximum likelihood

def has_recession_direction(features, data_index, tol=1e-9):
    """Whether a log-linear likelihood keeps increasing along some ray.

    For energies ``E_s = features[s] @ theta`` the exact likelihood has no
    finite maximizer iff some direction ``u`` makes every data state attain
    ``min_s features[s] @ u`` while at least one other state lies strictly
    above it. Solved as a bounded linear program.

    Parameters
    ----------
    features : ndarray of shape (2**d, P)
    data_index : array_like of int
        Indices of states with positive data weight.
    tol : float
        Per-state threshold on the LP optimum, absorbing solver round-off.
    """
    F = np.asarray(features, dtype=np.float64)
    S, P = F.shape
    D = np.unique(np.asarray(data_index))
    # variables [u, c]; maximize sum_s (F_s u - c) subject to F_s u >= c, F_D u = c
    cost = -np.concatenate([F.sum(axis=0), [-S]])
    A_ub = np.hstack([-F, np.ones((S, 1))])
    A_eq = np.hstack([F[D], -np.ones((len(D), 1))])
    bounds = [(-1.0, 1.0)] * P + [(None, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(S), A_eq=A_eq, b_eq=np.zeros(len(D)),
                  bounds=bounds, method="highs")
    return bool(res.status == 0 and -res.fun > tol * S)


def exact_ml_fit(model, data, cfg=None, divergence_bound=50.0):
    """Maximize the exact mean log-likelihood by L-BFGS with an enumerated ``Z``.

    Parameters
    ----------
    model : EnergyModel
        Binary model supplying the starting parameters.
    data : Dataset
    cfg : OptimizerConfig, optional
    divergence_bound : float
        For models whose energy is not linear in the parameters, parameters
        beyond this magnitude, or failure to converge, set ``diverged``.
        Ising and tabular models use the exact recession-direction test
        instead, since the gradient of an unbounded likelihood can still
        shrink below tolerance.

    Returns
    -------
    FitResult
    """
    d = model.d
    if d > MAX_ENUM_DIM:
        raise ValueError(f"d={d} exceeds the enumeration cap of {MAX_ENUM_DIM}")
    if data.d != d:
        raise ValueError(f"data dimension {data.d} != model dimension {d}")
    cfg = cfg or OptimizerConfig()
    S = all_states(d)
    w = data.row_weights()
    g_data = w @ model.param_grad(data.rows)
    linear = isinstance(model, (IsingModel, TabularModel))
    F = model.param_grad(S) if linear else None

    def fun(theta):
        m = model.with_params(theta)
        if linear:
            E_all = F @ theta
            E_data = m.energy(data.rows)
        else:
            E_all = m.energy(S)
            E_data = m.energy(data.rows)
        logZ = logsumexp(-E_all)
        p = np.exp(-E_all - logZ)
        G = F if linear else m.param_grad(S)
        gd = g_data if linear else w @ m.param_grad(data.rows)
        return w @ E_data + logZ, gd - p @ G

    res = lbfgs_minimize(fun, model.params, cfg)
    if linear:
        diverged = has_recession_direction(F, encode_state(data.rows[w > 0]))
    else:
        diverged = (not res.converged) or bool(np.max(np.abs(res.x)) > divergence_bound)
    if diverged:
        logger.warning("exact ML did not reach a finite maximizer (status %s)", res.status)
    return FitResult(model.with_params(res.x), res, diverged)


# ---------------------------------------------------------------------------
# pseudolikelihood

def ising_conditional_delta(J, X):
    """``E(x_n = 1) - E(x_n = 0)`` for every unit, shape ``(N, d)``."""
    J = np.asarray(J, dtype=np.float64)
    Xf = np.atleast_2d(X).astype(np.float64)
    diag = np.diag(J)
    return diag + 2.0 * (Xf @ J - Xf * diag)


def pl_objective(J, data):
    """Mean log-pseudolikelihood of an Ising model and its gradient.

    Parameters
    ----------
    J : array_like of shape (d, d) or IsingModel
        Symmetric couplings.
    data : Dataset

    Returns
    -------
    value : float
        Weighted mean over rows of ``sum_n log p(x_n | x_rest)``; to be maximized.
    grad : ndarray
        Gradient w.r.t. the upper-triangle Ising packing.
    """
    J = J.J if isinstance(J, IsingModel) else np.asarray(J, dtype=np.float64)
    d = J.shape[0]
    if data.d != d:
        raise ValueError(f"data dimension {data.d} != model dimension {d}")
    Xf = data.rows.astype(np.float64)
    w = data.row_weights()
    S = 2.0 * Xf - 1.0
    Z = S * ising_conditional_delta(J, Xf)
    value = -(w @ np.logaddexp(0.0, Z).sum(axis=1))
    C = -(w[:, None] * S * expit(Z))
    M = 2.0 * C.T @ Xf
    G = M + M.T
    G[np.diag_indices(d)] = C.sum(axis=0)
    return float(value), G[np.triu_indices(d)]


def pl_fit(data, cfg=None, model0=None):
    """Maximize the pseudolikelihood with L-BFGS on its negation."""
    d = data.d
    model0 = model0 or IsingModel.zeros(d)

    def fun(theta):
        v, g = pl_objective(IsingModel.from_params(d, theta).J, data)
        return -v, -g

    res = lbfgs_minimize(fun, model0.params, cfg or OptimizerConfig())
    return FitResult(IsingModel.from_params(d, res.x), res)


# ---------------------------------------------------------------------------
# contrastive divergence

@dataclass(frozen=True)
class CdConfig:
    """CD-k settings. Rates are divided by ``d`` when ``scale_by_dim``."""

    k: int = 1
    lr_start: float = 3.0
    lr_end: float = 0.1
    minibatch: int = 100
    epochs: int = 10
    scale_by_dim: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lr_start <= 0 or self.lr_end <= 0:
            raise ValueError("learning rates must be positive")

    def sgd(self, d):
        s = 1.0 / d if self.scale_by_dim else 1.0
        return SgdConfig(self.lr_start * s, self.lr_end * s, self.minibatch, self.epochs)


def cd_negative_samples(model, batch, k, rng):
    """States after ``k`` Gibbs steps from ``batch``."""
    if isinstance(model, RbmModel):
        return rbm_block_gibbs(model, batch, rng, k)
    X = batch
    for _ in range(k):
        X = gibbs_sweep(model, X, rng)
    return X


def cd_update(model, batch, k, eta, rng):
    """Parameter step ``eta * (-<dE>_data + <dE>_k)``."""
    neg = cd_negative_samples(model, batch, k, rng)
    step = -model.param_grad(batch).mean(axis=0) + model.param_grad(neg).mean(axis=0)
    return model.params + eta * step


def cd_fit(model, data, cfg=None, rng=None):
    """Contrastive divergence for Ising or RBM models, starting from ``model``.

    Returns a :class:`FitResult` (no convergence test is made).
    """
    cfg = cfg or CdConfig()
    rng = rng if rng is not None else np.random.default_rng()
    if data.kind != "binary" or data.d != model.d:
        raise ValueError("cd_fit needs binary data matching the model dimension")
    if data.weights is not None:
        raise ValueError("cd_fit needs unweighted data")

    def update(theta, batch, eta, r):
        return cd_update(model.with_params(theta), batch, cfg.k, eta, r)

    theta = sgd_anneal(update, model.params, data.rows, cfg.sgd(model.d), rng)
    return FitResult(model.with_params(theta))


# ---------------------------------------------------------------------------
# score matching

def sm_integrand(model, X):
    """Per-row ``|grad_x E|^2 / 2 - laplacian E``."""
    if not (hasattr(model, "x_grad") and hasattr(model, "laplacian")):
        raise TypeError("score matching needs an energy with first and second state derivatives")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    G = model.x_grad(X)
    return 0.5 * np.sum(G * G, axis=1) - model.laplacian(X)


def sm_objective(model, data):
    """Weighted mean of :func:`sm_integrand` over continuous data."""
    if data.kind != "continuous":
        raise ValueError("score matching expects continuous data")
    return float(data.row_weights() @ sm_integrand(model, data.rows))
