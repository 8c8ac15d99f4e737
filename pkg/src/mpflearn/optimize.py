"""L-BFGS with Armijo backtracking, and the annealed minibatch SGD loop."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
LINE_SEARCH_FAILED = "line_search_failed"


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    memory: int = 10
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 0 or self.memory < 1:
            raise ValueError("max_iters must be >= 0 and memory >= 1")
        if self.grad_tol <= 0 or not 0 < self.c1 < 1 or not 0 < self.backtrack < 1:
            raise ValueError("tolerances must be positive; c1, backtrack in (0, 1)")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    status: str
    n_iter: int
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == CONVERGED


def lbfgs_minimize(fun, x0, cfg=None, callback=None):
    """Minimize ``fun(x) -> (f, grad)`` from ``x0``.

    Stops when ``max|grad| < cfg.grad_tol`` (``converged``), after
    ``cfg.max_iters`` iterations (``max_iters``), or when the backtracking line
    search cannot find a sufficient decrease (``line_search_failed``). Accepted
    iterates are monotone non-increasing in ``f``.

    ``trace`` records ``f`` at every accepted iterate, starting with ``x0``.
    """
    cfg = cfg or OptimizerConfig()
    x = np.array(x0, dtype=np.float64, copy=True)
    f, g = fun(x)
    f = float(f)
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError("objective is not finite at the starting point")
    trace = [f]
    pairs = deque(maxlen=cfg.memory)
    status = MAX_ITERS
    it = 0
    while True:
        if np.max(np.abs(g), initial=0.0) < cfg.grad_tol:
            status = CONVERGED
            break
        if it >= cfg.max_iters:
            status = MAX_ITERS
            break

        p = -_two_loop(g, pairs)
        slope = g @ p
        if not slope < 0:
            pairs.clear()
            p = -g
            slope = g @ p
        # first step (no curvature yet) is scaled to unit length
        step = 1.0 if pairs else min(1.0, 1.0 / np.linalg.norm(g))

        for _ in range(cfg.max_backtracks + 1):
            x_new = x + step * p
            f_new, g_new = fun(x_new)
            f_new = float(f_new)
            if np.isfinite(f_new) and f_new <= f + cfg.c1 * step * slope:
                break
            step *= cfg.backtrack
        else:
            status = LINE_SEARCH_FAILED
            break

        g_new = np.asarray(g_new, dtype=np.float64)
        s = x_new - x
        y = g_new - g
        if y @ s > 1e-10:
            pairs.append((s, y, 1.0 / (y @ s)))
        x, f, g = x_new, f_new, g_new
        it += 1
        trace.append(f)
        if callback is not None:
            callback(x, f)

    logger.debug("lbfgs stopped: %s after %d iterations, f=%g", status, it, f)
    return OptimizeResult(x=x, fun=f, grad=g, status=status, n_iter=it, trace=trace)


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


@dataclass(frozen=True)
class SgdConfig:
    lr_start: float = 3.0
    lr_end: float = 0.1
    batch_size: int = 100
    epochs: int = 10

    def __post_init__(self):
        if self.lr_start <= 0 or self.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


def learning_rates(cfg, n_rows):
    """The linearly annealed rate for every step of an ``sgd_anneal`` run."""
    steps_per_epoch = -(-n_rows // cfg.batch_size)
    total = steps_per_epoch * cfg.epochs
    if total == 1:
        return np.array([cfg.lr_start])
    return np.linspace(cfg.lr_start, cfg.lr_end, total)


def sgd_anneal(update_fn, theta0, rows, cfg, rng):
    """Run ``theta = update_fn(theta, batch, eta, rng)`` over shuffled minibatches.

    ``eta`` moves linearly from ``cfg.lr_start`` to ``cfg.lr_end`` over all
    steps of all epochs.
    """
    rows = np.asarray(rows)
    etas = learning_rates(cfg, len(rows))
    theta = np.array(theta0, dtype=np.float64, copy=True)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(rows))
        for start in range(0, len(rows), cfg.batch_size):
            batch = rows[order[start:start + cfg.batch_size]]
            theta = update_fn(theta, batch, etas[step], rng)
            if not np.all(np.isfinite(theta)):
                raise FloatingPointError(
                    f"parameters became non-finite at epoch {epoch}, step {step} "
                    f"(eta={etas[step]:g})")
            step += 1
    return theta
