"""Exact categorical sampling, Gibbs sweeps and Hamiltonian Monte Carlo.

All samplers take an explicit ``numpy.random.Generator`` and are deterministic
given its seed.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .statespace import MAX_ENUM_DIM, decode_state

logger = logging.getLogger(__name__)


def exact_sample(dist, count, rng):
    """Draw ``count`` iid states from a :class:`TabularDistribution`."""
    if dist.d > MAX_ENUM_DIM:
        raise ValueError(f"d={dist.d} exceeds the enumeration cap")
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    # zero-probability tail states can never be chosen
    idx = np.minimum(idx, np.flatnonzero(dist.probs)[-1])
    return decode_state(idx, dist.d)


def gibbs_sweep(model, X, rng):
    """One ascending-order Gibbs sweep over every unit of every row of ``X``.

    Unit ``n`` is set to 1 with probability ``sigmoid(-(E(x|x_n=1) - E(x|x_n=0)))``
    using the already-updated values of units ``< n``.
    """
    X = np.array(X, dtype=np.int8, copy=True)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    d = X.shape[1]
    J = getattr(model, "J", None) if getattr(model, "kind", "") == "ising" else None
    for n in range(d):
        if J is not None:
            Xf = X.astype(np.float64)
            delta = 2.0 * (Xf @ J[:, n] - Xf[:, n] * J[n, n]) + J[n, n]
        else:
            X1 = X.copy()
            X1[:, n] = 1
            X0 = X.copy()
            X0[:, n] = 0
            delta = model.energy(X1) - model.energy(X0)
        X[:, n] = rng.random(len(X)) < expit(-delta)
    return X[0] if single else X


def gibbs_sample(model, count, rng, burn_in=100, thin=10, chains=None, x0=None):
    """Samples from a binary model by Gibbs sweeps (for ``d`` above the enumeration cap).

    Runs ``chains`` parallel chains (default: ``count``) from uniform random
    states, discards ``burn_in`` sweeps and keeps every ``thin``-th sweep.
    """
    chains = chains or count
    X = rng.integers(0, 2, size=(chains, model.d)).astype(np.int8) if x0 is None else x0
    for _ in range(burn_in):
        X = gibbs_sweep(model, X, rng)
    out = []
    kept = 0
    while kept < count:
        for _ in range(thin):
            X = gibbs_sweep(model, X, rng)
        out.append(X.copy())
        kept += len(X)
    return np.concatenate(out)[:count]


def rbm_block_gibbs(model, V, rng, steps=1):
    """Alternate exact hidden and visible resampling ``steps`` times."""
    V = np.atleast_2d(V).astype(np.int8)
    for _ in range(steps):
        H = (rng.random((len(V), model.n_hidden)) < model.hidden_prob(V)).astype(np.int8)
        V = (rng.random(V.shape) < model.visible_prob(H)).astype(np.int8)
    return V


@dataclass(frozen=True)
class HmcConfig:
    leapfrog_steps: int = 20
    step_size: float = 0.1
    trajectories_per_call: int = 1

    def __post_init__(self):
        if self.leapfrog_steps < 1 or self.trajectories_per_call < 1:
            raise ValueError("leapfrog_steps and trajectories_per_call must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")


def leapfrog(grad_fn, x, v, steps, step_size):
    """Integrate ``dx/dt = v, dv/dt = -grad E(x)`` with the leapfrog scheme."""
    x = np.array(x, dtype=np.float64, copy=True)
    v = np.array(v, dtype=np.float64, copy=True)
    v -= 0.5 * step_size * grad_fn(x)
    for k in range(steps):
        x += step_size * v
        if k < steps - 1:
            v -= step_size * grad_fn(x)
    v -= 0.5 * step_size * grad_fn(x)
    return x, v


def hamiltonian(energy_fn, x, v):
    return energy_fn(x) + 0.5 * np.sum(v * v, axis=-1)


def hmc_sample(energy_fn, grad_fn, x0, cfg, rng):
    """Run ``cfg.trajectories_per_call`` HMC trajectories from every row of ``x0``.

    Momentum is fully resampled per trajectory; proposals are accepted with
    probability ``min(1, exp(-dH))``. Trajectories reaching a non-finite
    energy are rejected.

    Returns
    -------
    x : ndarray, same shape as ``x0``
    accepted : int
        Accepted trajectories, summed over chains and trajectories.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    E0 = energy_fn(x)
    if not np.all(np.isfinite(E0)):
        raise FloatingPointError("non-finite energy at the starting state")
    accepted = 0
    bad = 0
    for _ in range(cfg.trajectories_per_call):
        v = rng.standard_normal(x.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            x1, v1 = leapfrog(grad_fn, x, v, cfg.leapfrog_steps, cfg.step_size)
            E1 = energy_fn(x1)
            dH = (E1 + 0.5 * np.sum(v1 * v1, axis=1)) - (E0 + 0.5 * np.sum(v * v, axis=1))
        finite = np.isfinite(dH) & np.all(np.isfinite(x1), axis=1)
        bad += int((~finite).sum())
        log_u = np.log(rng.random(len(x)))
        accept = finite & (log_u < -np.where(finite, dH, np.inf))
        x[accept] = x1[accept]
        E0 = np.where(accept, E1, E0)
        accepted += int(accept.sum())
    if bad:
        warnings.warn(f"{bad} HMC trajectories hit non-finite energy and were rejected",
                      RuntimeWarning, stacklevel=2)
    return (x[0] if single else x), accepted
