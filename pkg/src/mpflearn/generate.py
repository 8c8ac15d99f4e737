"""Synthetic data: lattice spin glasses, random Hopfield patterns, ICA mixtures."""

from __future__ import annotations

import re

import numpy as np

from .models import IcaModel, IsingModel
from .oracle import model_probs
from .samplers import exact_sample, gibbs_sample
from .statespace import MAX_ENUM_DIM, Dataset, TabularDistribution


def parse_lattice(text):
    """``"4x4"`` -> ``(4, 4)``."""
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", str(text))
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise ValueError(f"invalid lattice {text!r}; expected e.g. 4x4")
    return int(m.group(1)), int(m.group(2))


def lattice_couplings(rows, cols, sigma2, rng):
    """Open-boundary nearest-neighbor couplings ``~ Normal(0, sigma2)``.

    The diagonal is set so every column of ``J`` sums to zero.
    """
    d = rows * cols
    J = np.zeros((d, d))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for j in ([i + 1] if c + 1 < cols else []) + ([i + cols] if r + 1 < rows else []):
                J[i, j] = J[j, i] = rng.normal(0.0, np.sqrt(sigma2))
    J[np.diag_indices(d)] = -J.sum(axis=0)
    return J


def ising_lattice_data(rows, cols, sigma2, samples, rng):
    """Truth model and samples (exact up to the enumeration cap, Gibbs beyond).

    Returns ``(model, dataset, mode)``.
    """
    model = IsingModel(lattice_couplings(rows, cols, sigma2, rng))
    if model.d <= MAX_ENUM_DIM:
        dist = TabularDistribution(model.d, model_probs(model))
        return model, Dataset(exact_sample(dist, samples, rng)), "exact"
    return model, Dataset(gibbs_sample(model, samples, rng)), "sampled"


def ica_data(k, samples, rng, J=None):
    """``x = J^-1 s`` with ``s`` iid Laplace(1); ``J`` defaults to a random well-conditioned matrix.

    Returns ``(model, dataset)``.
    """
    if J is None:
        J = rng.normal(size=(k, k)) + 2.0 * np.eye(k)
    J = np.asarray(J, dtype=np.float64)
    S = rng.laplace(0.0, 1.0, size=(samples, k))
    X = np.linalg.solve(J, S.T).T
    return IcaModel(J), Dataset(X, kind="continuous")
