"""Recovery metrics comparing fitted and true parameters."""

from __future__ import annotations

import numpy as np

from .models import IsingModel
from .oracle import exact_moments
from .samplers import gibbs_sample
from .statespace import MAX_ENUM_DIM

EXACT = "exact"
SAMPLED = "sampled"


def _matrix(m):
    return m.J if hasattr(m, "J") else np.asarray(m, dtype=np.float64)


def mse_J(truth, estimate):
    """Mean squared error over unique couplings (upper triangle with diagonal)."""
    A, B = _matrix(truth), _matrix(estimate)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    iu = np.triu_indices(A.shape[0])
    return float(np.mean((A[iu] - B[iu]) ** 2))


def pairwise_moments(model, rng=None, samples=20000):
    """``<x_i x_j>`` matrix and the mode used to compute it.

    Exact by enumeration up to the cap; otherwise from Gibbs samples.
    """
    if model.d <= MAX_ENUM_DIM:
        return exact_moments(model), EXACT
    rng = rng if rng is not None else np.random.default_rng(0)
    X = gibbs_sample(model, samples, rng).astype(np.float64)
    return X.T @ X / len(X), SAMPLED


def corr_err(truth, estimate, rng=None):
    """Mean squared difference of pairwise moments over ``i < j``.

    Returns ``(value, mode)`` with mode ``"exact"`` or ``"sampled"``.
    """
    truth = truth if hasattr(truth, "energy") else IsingModel(truth)
    estimate = estimate if hasattr(estimate, "energy") else IsingModel(estimate)
    if truth.d != estimate.d:
        raise ValueError("dimension mismatch")
    Ct, mode = pairwise_moments(truth, rng)
    Ce, _ = pairwise_moments(estimate, rng)
    iu = np.triu_indices(truth.d, 1)
    return float(np.mean((Ct[iu] - Ce[iu]) ** 2)), mode
