"""Brute-force ground truth on enumerable state spaces.

Nothing here is used by the estimators themselves; these routines exist to
check them. The flow matrix ``Gamma`` uses the column convention: ``Gamma[i, j]``
is the rate from state ``j`` into state ``i``, and columns sum to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .flow import SINGLE_BIT_FLIP, connectivity_matrix
from .statespace import MAX_ENUM_DIM, all_states, empirical_distribution, encode_state

MAX_FLOW_DIM = 12


def _check(d, cap):
    if d > cap:
        raise ValueError(f"d={d} exceeds the enumeration cap of {cap}")


def all_energies(model):
    _check(model.d, MAX_ENUM_DIM)
    return model.energy(all_states(model.d))


def log_partition(model):
    """``log Z`` by enumeration with log-sum-exp stabilization."""
    return float(logsumexp(-all_energies(model)))


def partition_function(model):
    return float(np.exp(log_partition(model)))


def model_probs(model):
    """``p_inf`` over all states in index order."""
    E = all_energies(model)
    return np.exp(-E - logsumexp(-E))


def exact_loglik(model, data):
    """Mean (weighted) log-likelihood of binary ``data`` under ``model``."""
    logZ = log_partition(model)
    return float(data.row_weights() @ (-model.energy(data.rows)) - logZ)


def exact_moments(model):
    """Exact ``<x_i x_j>`` matrix (diagonal holds ``<x_i>``)."""
    S = all_states(model.d).astype(np.float64)
    p = model_probs(model)
    return (S * p[:, None]).T @ S


def exact_loglik_grad(model, data):
    """Gradient of :func:`exact_loglik` w.r.t. ``model.params``."""
    S = all_states(model.d)
    p = model_probs(model)
    return -(data.row_weights() @ model.param_grad(data.rows)) + p @ model.param_grad(S)


# ---------------------------------------------------------------------------
# flow matrix

@dataclass(frozen=True)
class FlowMatrix:
    d: int
    gamma: np.ndarray
    energies: np.ndarray
    connectivity: np.ndarray


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-structure of ``Gamma`` via the symmetric ``B = V^-1 Gamma V``.

    ``eigenvalues`` are sorted descending; ``vectors`` are orthonormal
    eigenvectors of ``B`` in matching column order; ``v_diag`` is the diagonal
    of ``V`` (``exp(-E/2)``, energies shifted to a zero minimum).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    v_diag: np.ndarray


def build_flow_matrix(model, scheme=SINGLE_BIT_FLIP, d=None):
    d = model.d if d is None else d
    _check(d, MAX_FLOW_DIM)
    E = all_energies(model)
    g = connectivity_matrix(scheme, d)
    gamma = g * np.exp(0.5 * (E[None, :] - E[:, None]))
    np.fill_diagonal(gamma, 0.0)
    np.fill_diagonal(gamma, -gamma.sum(axis=0))
    return FlowMatrix(d=d, gamma=gamma, energies=E, connectivity=g)


def spectrum(fm):
    E = fm.energies - fm.energies.min()
    # B_ij = Gamma_ij exp((E_i - E_j)/2), formed without overflow
    B = fm.gamma * np.exp(0.5 * (E[:, None] - E[None, :]))
    B = 0.5 * (B + B.T)
    lam, U = np.linalg.eigh(B)
    order = np.argsort(lam)[::-1]
    return SpectralDecomposition(lam[order], U[:, order], np.exp(-0.5 * E))


def _propagate_delta(eig, p0, t):
    """``p(t) - p0`` computed with ``expm1`` so small ``t`` keeps full precision."""
    V = eig.v_diag
    c = eig.vectors.T @ (p0 / V)
    return V * (eig.vectors @ (np.expm1(eig.eigenvalues * t) * c))


def evolve(fm, p0, t, eig=None):
    """``exp(Gamma t) p0`` for ``t >= 0``; tiny negative round-off is clipped to 0."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    p0 = np.asarray(getattr(p0, "probs", p0), dtype=np.float64)
    if t == 0:
        return p0.copy()
    eig = eig or spectrum(fm)
    p = p0 + _propagate_delta(eig, p0, t)
    return np.where((p < 0) & (p > -1e-12), 0.0, p)


def _kl_to_evolved(eig, p0, support, t):
    q = p0[support]
    delta = _propagate_delta(eig, p0, t)[support]
    return float(-(q @ np.log1p(delta / q)))


@dataclass(frozen=True)
class KlFlowResult:
    K_strict: float
    flow_sum: float
    kl_rate: float

    @property
    def flow_residual(self):
        return abs(self.K_strict - self.flow_sum)

    @property
    def rate_rel_residual(self):
        return abs(self.K_strict - self.kl_rate) / abs(self.K_strict)


def kl_flow_check(model, data, scheme=SINGLE_BIT_FLIP, h=1e-6):
    """Strict objective vs. flow-matrix sum vs. numerical ``d/dt KL(p0 || p(t))`` at 0."""
    from .flow import MpfOptions, mpf_objective

    _check(model.d, 10)
    K_strict, _ = mpf_objective(model, data, scheme,
                                MpfOptions(exclude_data_neighbors=True))
    fm = build_flow_matrix(model, scheme)
    p0 = empirical_distribution(data).probs
    support = p0 > 0
    flow_sum = float((fm.gamma[~support][:, support] @ p0[support]).sum())
    eig = spectrum(fm)
    rate = (_kl_to_evolved(eig, p0, support, h)
            - _kl_to_evolved(eig, p0, support, -h)) / (2 * h)
    return KlFlowResult(float(K_strict), flow_sum, rate)


@dataclass(frozen=True)
class SpectralBoundResult:
    data_index: np.ndarray
    bound: np.ndarray
    log_p: np.ndarray
    lambda2: float
    lambda2_bound: np.ndarray
    lambda2_bound_best: float

    @property
    def bound_holds(self):
        return bool(np.all(self.bound <= self.log_p + 1e-10))

    @property
    def lambda2_bound_holds(self):
        return bool(self.lambda2_bound_best <= self.lambda2 + 1e-10
                    and np.all(self.lambda2_bound <= self.lambda2 + 1e-10))


def spectral_bound(model, data, scheme=SINGLE_BIT_FLIP):
    """Eigenvalue lower bound on ``log p_inf`` at every distinct data state.

    Requires that no two data states are directly connected. Also returns
    the per-state lower bounds ``Gamma_ii / (1 - p_i)`` on ``lambda2`` and
    their maximum over all states.
    """
    fm = build_flow_matrix(model, scheme)
    p0 = empirical_distribution(data).probs
    D = np.flatnonzero(p0 > 0)
    if np.any(fm.connectivity[np.ix_(D, D)]):
        raise ValueError("data states are directly connected; the bound does not apply")
    eig = spectrum(fm)
    lam = eig.eigenvalues
    below = lam[lam < -1e-10]
    if below.size == 0 or abs(below.max()) < 1e-12:
        raise ValueError("no nonzero eigenvalue: connectivity is not ergodic")
    lam2 = float(below.max())
    diag = np.diag(fm.gamma)
    pdot = diag[D] * p0[D]
    arg = 1.0 - pdot / (p0[D] * lam2)
    with np.errstate(divide="ignore"):
        bound = np.where(arg > 0, np.log(np.maximum(arg, 1e-300)), -np.inf)
    p_inf = model_probs(model)
    lam2_bounds_all = diag / (1.0 - p_inf)
    return SpectralBoundResult(
        data_index=D, bound=bound, log_p=np.log(p_inf[D]), lambda2=lam2,
        lambda2_bound=lam2_bounds_all[D], lambda2_bound_best=float(lam2_bounds_all.max()))


# ---------------------------------------------------------------------------
# score-matching limit

def _cube_flow(model, X, eps, nodes):
    """Per-row ``integral over the side-eps cube of (exp((E(x) - E(x+a))/2) - 1) da``."""
    d = X.shape[1]
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * eps * t
    w = 0.5 * eps * w
    grids = np.meshgrid(*([t] * d), indexing="ij")
    alpha = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij")).reshape(d, -1), axis=0)
    out = np.empty(len(X))
    for k, x in enumerate(X):
        z = 0.5 * (model.energy(x[None, :]) - model.energy(x[None, :] + alpha))
        out[k] = wts @ np.expm1(z)
    return out


# The second-order expansion of the cube integral is
#   eps^d + eps^(d+2)/48 * (|grad E|^2 / 2 - lap E)
SM_RESCALE = 48.0


def sm_limit_check(model, X, eps_list, nodes=16):
    """Rescaled hypercube objective vs. the score-matching integrand.

    Returns a list of dicts with keys ``eps``, ``rescaled``, ``sm`` and
    ``error`` (absolute difference), one per ``eps``.
    """
    from .baselines import sm_integrand

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] > 3:
        raise ValueError("cubature check supports d <= 3")
    d = X.shape[1]
    sm = float(np.mean(sm_integrand(model, X)))
    rows = []
    for eps in eps_list:
        excess = _cube_flow(model, X, eps, nodes).mean()
        finer = _cube_flow(model, X, eps, 2 * nodes).mean()
        scale = SM_RESCALE / eps ** (d + 2)
        if abs(excess - finer) * scale > 1e-8:
            raise ArithmeticError(f"cubature not converged at eps={eps}")
        rescaled = excess * scale
        rows.append({"eps": float(eps), "rescaled": float(rescaled), "sm": sm,
                     "error": float(abs(rescaled - sm)), "K_mpf": float(eps ** d + excess)})
    return rows


def cube_objective(model, X, eps, nodes=16):
    """Mean hypercube flow ``K_MPF(eps)`` (including the ``eps^d`` constant)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return float(eps ** X.shape[1] + _cube_flow(model, X, eps, nodes).mean())


# ---------------------------------------------------------------------------
# finite differences

def _steps(theta, h):
    theta = np.asarray(theta, dtype=np.float64)
    if h is None:
        return 1e-5 * (1.0 + np.abs(theta))
    return np.broadcast_to(np.asarray(h, dtype=np.float64), theta.shape)


def fd_gradient(f, theta, h=None):
    """Central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=np.float64)
    hs = _steps(theta, h)
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e.flat[k] = hs.flat[k]
        fp, fm = f(theta + e), f(theta - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite evaluation at coordinate {k}")
        g.flat[k] = (fp - fm) / (2 * hs.flat[k])
    return g


def fd_hessian(grad_fn, theta, h=None):
    """Symmetrized central differences of an analytic gradient."""
    theta = np.asarray(theta, dtype=np.float64)
    hs = _steps(theta, h)
    n = theta.size
    H = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = hs[k]
        H[:, k] = (np.asarray(grad_fn(theta + e)) - np.asarray(grad_fn(theta - e))) / (2 * hs[k])
    return 0.5 * (H + H.T)


def hessian_min_eig(grad_fn, theta, h=None):
    return float(np.linalg.eigvalsh(fd_hessian(grad_fn, theta, h)).min())


def state_index(x):
    return encode_state(x)
