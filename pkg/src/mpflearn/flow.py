"""Minimum probability flow objectives.

The objective for data rows ``j`` with weights ``w_j`` (``1/|D|`` by default) is::

    K = eps * sum_j w_j sum_i g_ij exp((E_j - E_i) / 2)

and its gradient carries the factor 1/2 from differentiating the exponent.
The closed-form Ising and RBM versions here are normalized the same way; the
unnormalized per-dataset sums are ``K * |D|``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .models import IsingModel, RbmModel
from .optimize import OptimizerConfig, lbfgs_minimize
from .samplers import HmcConfig, hmc_sample

EXP_CLAMP = 500.0


class ClampWarning(RuntimeWarning):
    """Energy differences were clamped to +-500 before exponentiation."""


def _clamped_exp(z):
    if np.any(np.abs(z) > EXP_CLAMP):
        warnings.warn("energy differences clamped to +-500 before exp", ClampWarning,
                      stacklevel=3)
        z = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
    return np.exp(z)


# ---------------------------------------------------------------------------
# connectivity

@dataclass(frozen=True)
class SingleBitFlip:
    """Connect states at Hamming distance one."""


@dataclass(frozen=True)
class SingleFlipPlusComplement:
    """Single bit flips plus the all-bits-flipped state."""


@dataclass(frozen=True)
class EpsilonHypercube:
    """Continuous connectivity: every point in the side-``epsilon`` cube around a state."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class SampledProposal:
    """Connectivity drawn from a proposal distribution (see :func:`sampled_mpf`)."""

    proposal: object


SINGLE_BIT_FLIP = SingleBitFlip()
SINGLE_FLIP_PLUS_COMPLEMENT = SingleFlipPlusComplement()


def neighbors(x, scheme=SINGLE_BIT_FLIP):
    """States connected to ``x`` under a deterministic discrete scheme.

    For a single state returns shape ``(M, d)``; for rows ``(n, d)`` returns
    ``(n, M, d)``. Bit-flip neighbors come in dimension order, the complement
    (if any) last. For ``d == 1`` the complement coincides with the single flip
    and is not repeated.
    """
    if not isinstance(scheme, (SingleBitFlip, SingleFlipPlusComplement)):
        raise TypeError(f"{type(scheme).__name__} is not a deterministic discrete scheme")
    X = np.asarray(x)
    single = X.ndim == 1
    X = np.atleast_2d(X).astype(np.int8)
    n, d = X.shape
    eye = np.eye(d, dtype=np.int8)
    nb = X[:, None, :] ^ eye[None, :, :]
    if isinstance(scheme, SingleFlipPlusComplement) and d > 1:
        nb = np.concatenate([nb, (1 - X)[:, None, :]], axis=1)
    return nb[0] if single else nb


def connectivity_matrix(scheme, d):
    """Dense symmetric 0/1 adjacency over all ``2**d`` states (oracle use)."""
    from .statespace import all_states, encode_state

    S = all_states(d)
    nb = neighbors(S, scheme)
    g = np.zeros((1 << d, 1 << d))
    src = np.repeat(np.arange(1 << d), nb.shape[1])
    dst = encode_state(nb.reshape(-1, d))
    g[dst, src] = 1.0
    return g


def _state_keys(X):
    X = np.asarray(X, dtype=np.int64)
    d = X.shape[-1]
    if d <= 62:
        return X @ (np.int64(1) << np.arange(d, dtype=np.int64))
    packed = np.packbits(X.astype(np.uint8), axis=-1)
    return np.array([row.tobytes() for row in packed.reshape(-1, packed.shape[-1])],
                    dtype=object).reshape(X.shape[:-1])


# ---------------------------------------------------------------------------
# generic objective

@dataclass(frozen=True)
class MpfOptions:
    epsilon_scale: float = 1.0
    exclude_data_neighbors: bool = False

    def __post_init__(self):
        if not self.epsilon_scale > 0:
            raise ValueError("epsilon_scale must be positive")


def _data_rows(data, d):
    rows = data.rows
    if data.kind != "binary":
        raise ValueError("MPF over discrete connectivity needs binary data")
    if rows.shape[1] != d:
        raise ValueError(f"data dimension {rows.shape[1]} != model dimension {d}")
    return rows, data.row_weights()


def mpf_objective(model, data, scheme=SINGLE_BIT_FLIP, opts=None, chunk_size=None):
    """Objective value and gradient w.r.t. ``model.params`` for any binary energy model.

    Parameters
    ----------
    model : EnergyModel
    data : Dataset
        Binary observations; row weights are honored and duplicates count
        proportionally.
    scheme : SingleBitFlip or SingleFlipPlusComplement
    opts : MpfOptions, optional
        ``exclude_data_neighbors=True`` drops every connected state that is
        itself a data state (the strict KL-flow form).

    Returns
    -------
    K : float
    grad : ndarray of shape (model.n_params,)
    """
    opts = opts or MpfOptions()
    X, w = _data_rows(data, model.d)
    n, d = X.shape
    P = model.n_params
    data_keys = _state_keys(X) if opts.exclude_data_neighbors else None
    if chunk_size is None:
        m = d + 1
        chunk_size = max(1, int(2e7 // max(1, m * P)))

    K = 0.0
    grad = np.zeros(P)
    for lo in range(0, n, chunk_size):
        Xc, wc = X[lo:lo + chunk_size], w[lo:lo + chunk_size]
        nb = neighbors(Xc, scheme)
        nc, M, _ = nb.shape
        flat = nb.reshape(-1, d)
        Ej = model.energy(Xc)
        Ei = model.energy(flat).reshape(nc, M)
        T = _clamped_exp(0.5 * (Ej[:, None] - Ei))
        if data_keys is not None:
            T = T * ~np.isin(_state_keys(nb), data_keys)
        WT = wc[:, None] * T
        K += WT.sum()
        grad += 0.5 * (WT.sum(axis=1) @ model.param_grad(Xc)
                       - WT.ravel() @ model.param_grad(flat))
    eps = opts.epsilon_scale
    return eps * K, eps * grad


# ---------------------------------------------------------------------------
# closed forms

def ising_mpf(Jp, data, allflip=False):
    """Closed-form Ising objective over a possibly asymmetric ``J'``.

    The model uses ``J = (J' + J'^T) / 2``. Connectivity is single bit flips,
    plus the complement state when ``allflip``; no data states are excluded.

    Returns
    -------
    K : float
        Weighted mean over data rows.
    dK : ndarray of shape (d, d)
        Gradient w.r.t. ``J'``.
    """
    Jp = np.asarray(Jp, dtype=np.float64)
    d = Jp.shape[0]
    if Jp.shape != (d, d):
        raise ValueError("J' must be square")
    X, w = _data_rows(data, d)
    Xf = X.astype(np.float64)
    J = 0.5 * (Jp + Jp.T)
    S = 2.0 * Xf - 1.0
    diag = np.diag(J)
    Kfull = _clamped_exp(S * (Xf @ J) - 0.5 * diag)
    WK = w[:, None] * Kfull
    K = WK.sum()
    A = Xf.T @ (WK * S) - 0.5 * np.diag(WK.sum(axis=0))
    dK = 0.5 * (A + A.T)
    if allflip and d > 1:
        Xc = 1.0 - Xf
        Ex = np.einsum("ni,ij,nj->n", Xf, J, Xf)
        Ec = np.einsum("ni,ij,nj->n", Xc, J, Xc)
        WKa = w * _clamped_exp(0.5 * (Ex - Ec))
        K += WKa.sum()
        dK += 0.5 * ((Xf * WKa[:, None]).T @ Xf - (Xc * WKa[:, None]).T @ Xc)
    return K, dK


def symmetric_grad_to_params(G):
    """Map a gradient over a full ``J'`` onto the upper-triangle Ising packing."""
    G = np.asarray(G)
    d = G.shape[0]
    H = G + G.T - np.diag(np.diag(G))
    return H[np.triu_indices(d)]


def ising_mpf_params(theta, data, d, allflip=False):
    """:func:`ising_mpf` as a function of the Ising packing (for optimizers)."""
    J = IsingModel.from_params(d, theta).J
    K, G = ising_mpf(J, data, allflip=allflip)
    return K, symmetric_grad_to_params(G)


def rbm_mpf(W, data):
    """Closed-form objective for the hidden-marginalized RBM with single bit flips.

    Returns ``(K, dK)`` with ``dK`` shaped like ``W``.
    """
    W = np.asarray(W, dtype=np.float64)
    h, d = W.shape
    X, w = _data_rows(data, d)
    Xf = X.astype(np.float64)
    Dl = 1.0 - 2.0 * Xf                                  # change in x_n when flipped
    A = Xf @ W.T                                         # (N, h)
    Ap = A[:, None, :] + Dl[:, :, None] * W.T[None, :, :]  # (N, d, h)
    sp = np.logaddexp(0.0, -A)
    spp = np.logaddexp(0.0, -Ap)
    T = _clamped_exp(0.5 * (spp.sum(axis=2) - sp.sum(axis=1)[:, None]))
    WT = w[:, None] * T
    K = WT.sum()
    sig = expit(-A)
    sigp = expit(-Ap)
    Sp = WT[:, :, None] * sigp                           # (N, d, h)
    g_data = (sig * WT.sum(axis=1)[:, None]).T @ Xf
    g_nb = Sp.sum(axis=1).T @ Xf + np.einsum("xji,xj->ij", Sp, Dl)
    return K, 0.5 * (g_data - g_nb)


# ---------------------------------------------------------------------------
# sampled connectivity

class UniformBitFlipProposal:
    """Flip one dimension chosen uniformly at random; ``g = 1/d``."""

    def __init__(self, d):
        self.d = d

    def sample(self, X, size, rng):
        n = len(X)
        idx = rng.integers(self.d, size=(n, size))
        Y = np.repeat(X[:, None, :], size, axis=1).copy()
        rows = np.arange(n)[:, None]
        Y[rows, np.arange(size)[None, :], idx] ^= 1
        return Y

    def log_prob(self, Y, X):
        """``log g(Y | X)`` for proposal ``X -> Y``, broadcasting over leading axes."""
        ham = np.abs(Y.astype(np.int64) - X.astype(np.int64)).sum(axis=-1)
        return np.where(ham == 1, -np.log(self.d), -np.inf)


class BiasedBitFlipProposal:
    """Flip dimension ``n`` with probability proportional to ``exp(b_n (1 - 2 x_n))``.

    Positive ``b_n`` favors switching unit ``n`` on. The proposal is not
    symmetric, which exercises the ``sqrt(g_ji / g_ij)`` correction.
    """

    def __init__(self, bias):
        self.bias = np.asarray(bias, dtype=np.float64)
        self.d = self.bias.size

    def _logits(self, X):
        return self.bias * (1.0 - 2.0 * X)

    def flip_log_probs(self, X):
        L = self._logits(np.asarray(X, dtype=np.float64))
        return L - np.logaddexp.reduce(L, axis=-1, keepdims=True)

    def sample(self, X, size, rng):
        n = len(X)
        P = np.exp(self.flip_log_probs(X))
        C = np.cumsum(P, axis=1)
        u = rng.random((n, size))
        idx = np.minimum((u[:, :, None] > C[:, None, :]).sum(axis=2), self.d - 1)
        Y = np.repeat(X[:, None, :], size, axis=1).copy()
        Y[np.arange(n)[:, None], np.arange(size)[None, :], idx] ^= 1
        return Y

    def log_prob(self, Y, X):
        Y = np.asarray(Y, dtype=np.int64)
        X = np.broadcast_to(np.asarray(X, dtype=np.int64), Y.shape)
        diff = np.abs(Y - X)
        ham = diff.sum(axis=-1)
        lp = self.flip_log_probs(X)
        out = (lp * diff).sum(axis=-1)
        return np.where(ham == 1, out, -np.inf)


def sampled_mpf(model, data, proposal, samples_per_datum, rng):
    """Monte Carlo estimate of the objective with connectivity sampled from ``proposal``.

    For each data row ``j`` the inner sum over connected states is replaced
    by an average over ``samples_per_datum`` draws ``i ~ g(. | j)``, each
    weighted by ``sqrt(g_ji / g_ij)``.

    Returns ``(K_hat, grad_hat)``.
    """
    X, w = _data_rows(data, model.d)
    n, d = X.shape
    Y = proposal.sample(X, samples_per_datum, rng)
    Xb = np.broadcast_to(X[:, None, :], Y.shape)
    log_fwd = proposal.log_prob(Y, Xb)
    log_rev = proposal.log_prob(Xb, Y)
    if not np.all(np.isfinite(log_fwd)):
        raise ValueError("proposal drew a state it assigns zero density")
    if not np.all(np.isfinite(log_rev)):
        raise ValueError("proposal is not reversible: g_ij > 0 but g_ji = 0")
    flat = Y.reshape(-1, d)
    Ej = model.energy(X)
    Ei = model.energy(flat).reshape(n, samples_per_datum)
    T = _clamped_exp(0.5 * (Ej[:, None] - Ei) + 0.5 * (log_rev - log_fwd))
    WT = (w[:, None] / samples_per_datum) * T
    K = WT.sum()
    grad = 0.5 * (WT.sum(axis=1) @ model.param_grad(X) - WT.ravel() @ model.param_grad(flat))
    return K, grad


# ---------------------------------------------------------------------------
# persistent MPF

def pmpf_objective(model, theta, data_rows, particles, E_data_ref, E_part_ref,
                   data_weights=None):
    """Factored persistent objective at one learning step.

    ``E_data_ref`` and ``E_part_ref`` are the energies of data and particles
    under the previous parameters. Equals exactly 1 at those parameters.
    """
    m = model.with_params(theta)
    w = (np.full(len(data_rows), 1.0 / len(data_rows)) if data_weights is None
         else data_weights)
    a = _clamped_exp(0.5 * (m.energy(data_rows) - E_data_ref))
    b = _clamped_exp(-0.5 * (m.energy(particles) - E_part_ref))
    A = w @ a
    B = b.mean()
    ga = (w * a) @ m.param_grad(data_rows)
    gb = b @ m.param_grad(particles) / len(particles)
    return A * B, 0.5 * (ga * B - A * gb)


@dataclass(frozen=True)
class PmpfConfig:
    outer_iters: int = 50
    inner_descent_steps: int = 10
    hmc: HmcConfig = field(default_factory=HmcConfig)
    particle_count: int | None = None

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_descent_steps < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.particle_count is not None and self.particle_count < 1:
            raise ValueError("particle_count must be >= 1")


def pmpf_fit(model, data, cfg, rng, keep_particles=False):
    """Fit a continuous model by persistent MPF with HMC-refreshed particles.

    Starts from ``model``'s parameters, initializes particles from an
    isotropic Gaussian, then alternates an HMC refresh of the particles under
    the previous parameters with ``cfg.inner_descent_steps`` L-BFGS iterations
    on the factored objective.

    Returns
    -------
    model : EnergyModel
        Fitted model.
    trace : list of dict
        Per outer iteration: ``K_start`` (always 1), ``K_end``, ``accept_rate``
        and, when ``keep_particles``, the particle array.
    """
    if not hasattr(model, "x_grad"):
        raise TypeError("persistent MPF needs an energy with a state gradient")
    if data.kind != "continuous":
        raise ValueError("persistent MPF expects continuous data")
    X = data.rows
    w = data.row_weights()
    count = cfg.particle_count or len(X)
    particles = rng.standard_normal((count, model.d))
    inner = OptimizerConfig(max_iters=cfg.inner_descent_steps, grad_tol=1e-12)
    trace = []
    for it in range(cfg.outer_iters):
        particles, accepted = hmc_sample(model.energy, model.x_grad, particles,
                                         cfg.hmc, rng)
        E_data_ref = model.energy(X)
        E_part_ref = model.energy(particles)
        if not (np.all(np.isfinite(E_data_ref)) and np.all(np.isfinite(E_part_ref))):
            raise FloatingPointError(f"non-finite energies at outer iteration {it}")

        def fun(theta):
            return pmpf_objective(model, theta, X, particles, E_data_ref, E_part_ref, w)

        res = lbfgs_minimize(fun, model.params, inner)
        if not np.isfinite(res.fun):
            raise FloatingPointError(f"objective became non-finite at outer iteration {it}")
        model = model.with_params(res.x)
        entry = {"iter": it, "K_start": res.trace[0], "K_end": res.fun,
                 "accept_rate": accepted / (count * cfg.hmc.trajectories_per_call)}
        if keep_particles:
            entry["particles"] = particles.copy()
        trace.append(entry)
    return model, trace
