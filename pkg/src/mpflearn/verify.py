"""Named verification checks against brute-force and analytic ground truth.

Every check is a function ``check(seed) -> CheckResult``; ``CHECKS`` maps the
public names to them in a fixed order.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines, hopfield
from .flow import (SINGLE_BIT_FLIP, SINGLE_FLIP_PLUS_COMPLEMENT, ClampWarning, MpfOptions,
                   ising_mpf, ising_mpf_params, mpf_objective, pmpf_fit, pmpf_objective,
                   rbm_mpf, PmpfConfig)
from .generate import ica_data, ising_lattice_data
from .metrics import mse_J
from .models import GaussianModel, IcaModel, IsingModel, RbmModel
from .optimize import OptimizerConfig, lbfgs_minimize
from .oracle import (fd_gradient, hessian_min_eig, kl_flow_check, model_probs, sm_limit_check,
                     spectral_bound)
from .samplers import HmcConfig, gibbs_sweep, hmc_sample, leapfrog
from .statespace import Dataset, all_states, encode_state


@dataclass
class CheckResult:
    name: str
    passed: bool
    tolerance: str
    observed: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self):
        return asdict(self)

    def line(self):
        obs = ", ".join(f"{k}={_fmt(v)}" for k, v in self.observed.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {obs} (tolerance: {self.tolerance})"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, list) and v and isinstance(v[0], float):
        return "[" + ", ".join(f"{x:.3g}" for x in v) + "]"
    return str(v)


def _rel_err(g, ref):
    return float(np.linalg.norm(g - ref) / max(np.linalg.norm(ref), 1e-300))


def _random_binary(rng, n, d):
    return rng.integers(0, 2, size=(n, d)).astype(np.int8)


def _random_weights(rng, n):
    w = rng.random(n) + 0.1
    return w / w.sum()


def _sym(rng, d, scale):
    A = rng.normal(0.0, scale, size=(d, d))
    return 0.5 * (A + A.T)


# ---------------------------------------------------------------------------
# gradient suite

def gradient_errors(seed=0, instances=20):
    """Worst relative error between analytic and central-difference gradients per objective."""
    rng = np.random.default_rng(seed)
    worst = {}

    def record(key, g, ref):
        worst[key] = max(worst.get(key, 0.0), _rel_err(g, ref))

    for k in range(instances):
        d = int(rng.integers(3, 9))
        n = int(rng.integers(5, 30))
        data = Dataset(_random_binary(rng, n, d), weights=_random_weights(rng, n))

        scheme = SINGLE_BIT_FLIP if k % 2 else SINGLE_FLIP_PLUS_COMPLEMENT
        opts = MpfOptions(exclude_data_neighbors=bool(k % 3 == 0))
        model = IsingModel(_sym(rng, d, 0.5))
        _, g = mpf_objective(model, data, scheme, opts)
        ref = fd_gradient(lambda t: mpf_objective(model.with_params(t), data, scheme, opts)[0],
                          model.params)
        record("mpf_objective", g, ref)

        Jp = rng.normal(0.0, 0.5, size=(d, d))
        allflip = bool(k % 2)
        _, G = ising_mpf(Jp, data, allflip)
        ref = fd_gradient(lambda t: ising_mpf(t.reshape(d, d), data, allflip)[0], Jp.ravel())
        record("ising_mpf", G.ravel(), ref)

        W = rng.normal(0.0, 0.5, size=(3, d))
        _, G = rbm_mpf(W, data)
        ref = fd_gradient(lambda t: rbm_mpf(t.reshape(W.shape), data)[0], W.ravel())
        record("rbm_mpf", G.ravel(), ref)

        net = hopfield.HopfieldNet.from_params(
            d, rng.normal(0.0, 0.5, size=d * (d - 1) // 2 + d))
        _, g = hopfield.hopfield_mpf_params(net.params, data.rows, d)
        ref = fd_gradient(lambda t: hopfield.hopfield_mpf_params(t, data.rows, d)[0], net.params)
        record("hopfield_mpf_objective", g, ref)

        th = IsingModel(_sym(rng, d, 0.5)).params
        _, g = baselines.pl_objective(IsingModel.from_params(d, th).J, data)
        ref = fd_gradient(lambda t: baselines.pl_objective(IsingModel.from_params(d, t).J,
                                                           data)[0], th)
        record("pl_objective", g, ref)

        kdim = int(rng.integers(2, 5))
        J = rng.normal(size=(kdim, kdim)) + 2.0 * np.eye(kdim)
        cont = Dataset(rng.laplace(size=(40, kdim)), kind="continuous")
        _, G = IcaModel(J).loglik(cont)
        ref = fd_gradient(lambda t: IcaModel(t.reshape(kdim, kdim)).loglik(cont)[0], J.ravel())
        record("ica_loglik", G.ravel(), ref)

        prev = IcaModel(J)
        parts = rng.normal(size=(30, kdim))
        theta = J.ravel() + rng.normal(0.0, 0.1, size=J.size)
        Ed, Ep = prev.energy(cont.rows), prev.energy(parts)
        _, g = pmpf_objective(prev, theta, cont.rows, parts, Ed, Ep)
        ref = fd_gradient(lambda t: pmpf_objective(prev, t, cont.rows, parts, Ed, Ep)[0], theta)
        record("pmpf_objective", g, ref)
    return worst


def check_gradients(seed=0):
    t0 = time.perf_counter()
    worst = gradient_errors(seed)
    ok = all(v < 1e-6 for v in worst.values())
    return CheckResult("gradients", ok, "relative error < 1e-6 on 20 instances each",
                       {k: float(v) for k, v in worst.items()}, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# flow identities

def check_kl_flow(seed=0, instances=20):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    flow_res, rate_res = 0.0, 0.0
    for _ in range(instances):
        d = int(rng.integers(3, 9))
        model = IsingModel(_sym(rng, d, 0.5))
        data = Dataset(_random_binary(rng, int(rng.integers(2, 2 ** (d - 1))), d))
        r = kl_flow_check(model, data)
        flow_res = max(flow_res, r.flow_residual)
        rate_res = max(rate_res, r.rate_rel_residual)
    ok = flow_res < 1e-12 and rate_res < 1e-4
    return CheckResult("kl-flow", ok, "|K - flow| < 1e-12 and |K - KL rate|/K < 1e-4",
                       {"max_flow_residual": flow_res, "max_rate_rel_residual": rate_res},
                       time.perf_counter() - t0)


def check_convexity(seed=0, instances=20):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    ising_min, hop_min = np.inf, np.inf
    for _ in range(instances):
        d = int(rng.integers(3, 7))
        data = Dataset(_random_binary(rng, 20, d))
        th = IsingModel(_sym(rng, d, 0.5)).params
        ising_min = min(ising_min, hessian_min_eig(
            lambda t: ising_mpf_params(t, data, d)[1], th))
        hp = rng.normal(0.0, 0.5, size=d * (d - 1) // 2 + d)
        hop_min = min(hop_min, hessian_min_eig(
            lambda t: hopfield.hopfield_mpf_params(t, data.rows, d)[1], hp))
    ok = ising_min >= -1e-8 and hop_min >= -1e-8
    return CheckResult("convexity", ok, "min Hessian eigenvalue >= -1e-8",
                       {"ising_min_eig": float(ising_min), "hopfield_min_eig": float(hop_min)},
                       time.perf_counter() - t0)


def check_consistency(seed=0):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    d = 6
    truth = IsingModel(_sym(rng, d, 1.0))
    data = Dataset(all_states(d), weights=model_probs(truth))
    _, g = ising_mpf_params(truth.params, data, d)
    grad_inf = float(np.max(np.abs(g)))
    start = rng.normal(0.0, 1.0, size=truth.n_params)
    res = lbfgs_minimize(lambda t: ising_mpf_params(t, data, d), start,
                         OptimizerConfig(max_iters=1000, grad_tol=1e-10))
    mse = mse_J(truth, IsingModel.from_params(d, res.x))
    ok = grad_inf < 1e-9 and mse < 1e-6
    return CheckResult("consistency", ok, "max|grad K(theta*)| < 1e-9 and mse_J < 1e-6",
                       {"grad_inf_at_truth": grad_inf, "mse_J": mse, "status": res.status},
                       time.perf_counter() - t0)


def check_sm_limit(seed=0):
    t0 = time.perf_counter()
    rows = sm_limit_check(GaussianModel(np.eye(2)), np.array([[1.0, 1.0]]), [0.4, 0.2, 0.1])
    errs = [r["error"] for r in rows]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(3.0 <= r <= 5.0 for r in ratios)
    return CheckResult("sm-limit", ok, "error ratio per halving of eps in [3, 5]",
                       {"errors": errs, "ratios": ratios, "sm": rows[0]["sm"]},
                       time.perf_counter() - t0)


def _modes_unconnected(model, count):
    """The most probable states, greedily skipping any adjacent to one already chosen."""
    order = np.argsort(-model_probs(model))
    S = all_states(model.d)
    chosen = []
    for idx in order:
        if all(np.sum(S[idx] != y) >= 2 for y in chosen):
            chosen.append(S[idx])
            if len(chosen) == count:
                break
    return np.array(chosen)


def check_spectral_bound(seed=0, instances=20):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_gap, worst_l2 = -np.inf, -np.inf
    ok = True
    finite_count = total = 0
    for _ in range(instances):
        d = 8
        model = IsingModel(_sym(rng, d, 1.5))
        X = _modes_unconnected(model, int(rng.integers(1, 6)))
        r = spectral_bound(model, Dataset(X, weights=_random_weights(rng, len(X))))
        ok &= r.bound_holds and r.lambda2_bound_holds
        finite = np.isfinite(r.bound)
        finite_count += int(finite.sum())
        total += finite.size
        if finite.any():
            worst_gap = max(worst_gap, float(np.max(r.bound[finite] - r.log_p[finite])))
        worst_l2 = max(worst_l2, r.lambda2_bound_best - r.lambda2)
    return CheckResult("spectral-bound", bool(ok),
                       "bound <= log p + 1e-10; lambda2 estimate <= lambda2 + 1e-10",
                       {"finite_bounds": f"{finite_count}/{total}",
                        "max_bound_minus_logp": worst_gap,
                        "max_lambda2_est_minus_lambda2": worst_l2},
                       time.perf_counter() - t0)


def check_specialization(seed=0, instances=20):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = {"ising": 0.0, "ising_allflip": 0.0, "rbm": 0.0, "hopfield": 0.0}

    def diff(a, b):
        a, b = np.atleast_1d(a), np.atleast_1d(b)
        return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))

    for _ in range(instances):
        d = int(rng.integers(2, 9))
        n = int(rng.integers(3, 25))
        data = Dataset(_random_binary(rng, n, d), weights=_random_weights(rng, n))
        model = IsingModel(_sym(rng, d, 0.7))
        for key, allflip, scheme in (("ising", False, SINGLE_BIT_FLIP),
                                     ("ising_allflip", True, SINGLE_FLIP_PLUS_COMPLEMENT)):
            K1, g1 = ising_mpf_params(model.params, data, d, allflip)
            K2, g2 = mpf_objective(model, data, scheme)
            worst[key] = max(worst[key], diff(K1, K2), diff(g1, g2))
        W = rng.normal(0.0, 0.7, size=(3, d))
        K1, G1 = rbm_mpf(W, data)
        K2, g2 = mpf_objective(RbmModel(W), data)
        worst["rbm"] = max(worst["rbm"], diff(K1, K2), diff(G1.ravel(), g2))
        net = hopfield.HopfieldNet.from_params(
            d, rng.normal(0.0, 0.7, size=d * (d - 1) // 2 + d))
        pats = Dataset(_random_binary(rng, n, d))
        K1, g1 = hopfield.hopfield_mpf_params(net.params, pats, d)
        K2, _ = mpf_objective(net.to_ising(), pats)
        K3, g3 = mpf_objective(net, pats)
        worst["hopfield"] = max(worst["hopfield"], diff(K1, n * K2), diff(K1, n * K3),
                                diff(g1, n * g3))
    ok = all(v <= 1e-12 for v in worst.values())
    return CheckResult("specialization", ok, "closed forms equal the generic objective to 1e-12",
                       worst, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# samplers

def check_samplers(seed=0):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    d = 4
    model = IsingModel(_sym(rng, d, 0.7))
    chains = 40000
    X = rng.integers(0, 2, size=(chains, d)).astype(np.int8)
    for _ in range(30):
        X = gibbs_sweep(model, X, rng)
    freq = np.bincount(encode_state(X), minlength=2 ** d) / chains
    p = model_probs(model)
    z_gibbs = float(np.max(np.abs(freq - p) / np.sqrt(p * (1 - p) / chains)))

    cfg = HmcConfig(leapfrog_steps=10, step_size=0.2, trajectories_per_call=10)
    energy = GaussianModel(np.eye(2))
    Y, _ = hmc_sample(energy.energy, energy.x_grad, rng.standard_normal((10000, 2)) * 3.0,
                      cfg, rng)
    N = len(Y)
    z_mean = float(np.max(np.abs(Y.mean(axis=0)) / np.sqrt(1.0 / N)))
    C = np.cov(Y.T)
    z_cov = float(max(abs(C[0, 0] - 1) / np.sqrt(2.0 / N), abs(C[1, 1] - 1) / np.sqrt(2.0 / N),
                      abs(C[0, 1]) / np.sqrt(1.0 / N)))

    x0 = rng.standard_normal((2000, 2))
    v0 = rng.standard_normal((2000, 2))

    def mean_drift(eps):
        x1, v1 = leapfrog(energy.x_grad, x0, v0, int(round(2.0 / eps)), eps)
        H0 = energy.energy(x0) + 0.5 * np.sum(v0 * v0, axis=1)
        H1 = energy.energy(x1) + 0.5 * np.sum(v1 * v1, axis=1)
        return float(np.mean(np.abs(H1 - H0)))

    drift_ratio = mean_drift(0.2) / mean_drift(0.1)
    ok = z_gibbs < 4 and z_mean < 3 and z_cov < 3 and 3 <= drift_ratio <= 5
    return CheckResult("samplers", ok,
                       "Gibbs within 4 sigma; HMC moments within 3 SE; drift ratio in [3, 5]",
                       {"gibbs_max_z": z_gibbs, "hmc_mean_max_z": z_mean,
                        "hmc_cov_max_z": z_cov, "drift_ratio": drift_ratio},
                       time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# experiments

def ordering_seed(seed, samples=20000, sigma2=10.0):
    """Coupling MSE of MPF, CD-1 and exact ML on one 4x4 lattice draw."""
    rng = np.random.default_rng(seed)
    truth, data, _ = ising_lattice_data(4, 4, sigma2, samples, rng)
    d = truth.d
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        res = lbfgs_minimize(lambda t: ising_mpf_params(t, data, d), IsingModel.zeros(d).params)
    mpf = IsingModel.from_params(d, res.x)
    cd = baselines.cd_fit(IsingModel.zeros(d), data, baselines.CdConfig(k=1), rng).model
    ml = baselines.exact_ml_fit(IsingModel.zeros(d), data)
    return {"seed": seed, "mse_mpf": mse_J(truth, mpf), "mse_cd1": mse_J(truth, cd),
            "mse_ml": mse_J(truth, ml.model), "mpf_status": res.status,
            "ml_status": ml.result.status, "ml_diverged": ml.diverged}


def check_ordering(seed=0, seeds=5):
    t0 = time.perf_counter()
    rows = [ordering_seed(seed + s) for s in range(seeds)]
    wins = [r["mse_mpf"] <= r["mse_cd1"] and r["mse_mpf"] <= 2 * r["mse_ml"] for r in rows]
    return CheckResult("ordering", sum(wins) >= 4,
                       "mse(MPF) <= mse(CD-1) and <= 2 mse(ML) in >= 4 of 5 seeds",
                       {"seeds_holding": int(sum(wins)),
                        "mse_mpf": [r["mse_mpf"] for r in rows],
                        "mse_cd1": [r["mse_cd1"] for r in rows],
                        "mse_ml": [r["mse_ml"] for r in rows],
                        "ml_diverged": [r["ml_diverged"] for r in rows]},
                       time.perf_counter() - t0)


def check_hopfield_capacity(seed=0):
    t0 = time.perf_counter()
    rows = hopfield.capacity_experiment(32, [32], 20, ("mpf", "opr"), np.random.default_rng(seed))
    got = {r["method"]: r["mean"] for r in rows}
    ok = got["mpf"] >= 0.99 and got["opr"] < 0.5
    return CheckResult("hopfield-capacity", ok, "MPF >= 0.99 and OPR < 0.5 at n = m = 32",
                       {"mpf": got["mpf"], "opr": got["opr"]}, time.perf_counter() - t0)


def check_hopfield_denoise(seed=0):
    t0 = time.perf_counter()
    rows = hopfield.denoise_experiment(64, 13, [6], 20, ("mpf", "per"),
                                       np.random.default_rng(seed))
    got = {r["method"]: r["mean"] for r in rows}
    ok = got["mpf"] >= 0.9 and got["mpf"] >= got["per"]
    return CheckResult("hopfield-denoise", ok,
                       "MPF recovery >= 0.9 and >= PER at n=64, m=13, 6 flipped bits",
                       {"mpf": got["mpf"], "per": got["per"]}, time.perf_counter() - t0)


def check_ica_parity(seed=0):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    _, data = ica_data(2, 10000, rng)

    def fun(theta):
        L, g = IcaModel(theta.reshape(2, 2)).loglik(data)
        return -L, -g.ravel()

    ml = lbfgs_minimize(fun, np.eye(2).ravel())
    pm, _ = pmpf_fit(IcaModel(np.eye(2)), data, PmpfConfig(), rng)
    L_pm = pm.loglik(data)[0]
    gap = float(abs(-ml.fun - L_pm))
    return CheckResult("ica-parity", gap <= 0.3, "|L(PMPF) - L(ML)| <= 0.3 nats",
                       {"loglik_ml": float(-ml.fun), "loglik_pmpf": float(L_pm), "gap": gap},
                       time.perf_counter() - t0)


CHECKS = {
    "gradients": check_gradients,
    "kl-flow": check_kl_flow,
    "convexity": check_convexity,
    "consistency": check_consistency,
    "sm-limit": check_sm_limit,
    "spectral-bound": check_spectral_bound,
    "ordering": check_ordering,
    "hopfield-capacity": check_hopfield_capacity,
    "hopfield-denoise": check_hopfield_denoise,
    "ica-parity": check_ica_parity,
    "samplers": check_samplers,
    "specialization": check_specialization,
}


def run_checks(names=None, seed=0):
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    return [CHECKS[n](seed) for n in names]
