"""Command-line harness: ``gen``, ``fit``, ``eval``, ``hopfield`` and ``verify``.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings

import numpy as np

from . import baselines, hopfield
from .flow import ClampWarning, PmpfConfig, ising_mpf_params, pmpf_fit
from .generate import ica_data, ising_lattice_data, parse_lattice
from .metrics import EXACT, corr_err, mse_J
from .models import IcaModel, IsingModel, load_params, save_params
from .optimize import OptimizerConfig, lbfgs_minimize
from .oracle import exact_loglik
from .samplers import HmcConfig
from .statespace import MAX_ENUM_DIM, Dataset, read_dataset, write_dataset
from .verify import CHECKS, run_checks

logger = logging.getLogger("mpflearn")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

ISING_METHODS = ("mpf", "mpf-allflip", "pl", "cd1", "cd10", "ml-exact")
HOPFIELD_METHODS = ("hopfield-mpf", "opr", "per")
CONTINUOUS_METHODS = ("pmpf",)
ALL_METHODS = ISING_METHODS + CONTINUOUS_METHODS + HOPFIELD_METHODS


class UsageError(Exception):
    """Invalid combination of arguments (exit code 2)."""


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# gen

def cmd_gen(args):
    rng = np.random.default_rng(args.seed)
    if args.kind == "ising":
        try:
            rows, cols = parse_lattice(args.lattice)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if rows * cols > MAX_ENUM_DIM:
            logger.warning("d=%d exceeds the enumeration cap; falling back to Gibbs sampling",
                           rows * cols)
        truth, data, mode = ising_lattice_data(rows, cols, args.sigma2, args.samples, rng)
        write_dataset(_out_path(args, "data.mpf"), data)
        save_params(_out_path(args, "truth.json"), truth, sampling=mode)
        summary = {"d": truth.d, "samples": data.n, "sampling": mode}
    elif args.kind == "hopfield-patterns":
        X = hopfield.random_patterns(args.n, args.m, rng)
        write_dataset(_out_path(args, "patterns.mpf"), Dataset(X))
        summary = {"n": args.n, "m": args.m}
    else:
        truth, data = ica_data(args.k, args.samples, rng)
        write_dataset(_out_path(args, "data.mpf"), data)
        save_params(_out_path(args, "truth.json"), truth)
        summary = {"k": args.k, "samples": data.n}
    summary["config"] = _echo(args)
    _write_json(_out_path(args, "gen.json"), summary)
    print(json.dumps(summary, default=_json_default))
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit / eval

def _optimizer(args):
    return OptimizerConfig(max_iters=args.max_iter, grad_tol=args.tol)


def _fit_ising(method, data, args, rng):
    d = data.d
    if method in ("mpf", "mpf-allflip"):
        allflip = method == "mpf-allflip"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            res = lbfgs_minimize(lambda t: ising_mpf_params(t, data, d, allflip),
                                 IsingModel.zeros(d).params, _optimizer(args))
        return IsingModel.from_params(d, res.x), {"status": res.status, "iterations": res.n_iter}
    if method == "pl":
        fit = baselines.pl_fit(data, _optimizer(args))
        return fit.model, {"status": fit.result.status, "iterations": fit.result.n_iter}
    if method in ("cd1", "cd10"):
        cfg = baselines.CdConfig(k=1 if method == "cd1" else 10, lr_start=args.lr_start,
                                 lr_end=args.lr_end, minibatch=args.batch_size,
                                 epochs=args.epochs)
        return baselines.cd_fit(IsingModel.zeros(d), data, cfg, rng).model, {}
    if d > MAX_ENUM_DIM:
        raise UsageError(f"ml-exact needs d <= {MAX_ENUM_DIM}")
    fit = baselines.exact_ml_fit(IsingModel.zeros(d), data, _optimizer(args))
    return fit.model, {"status": fit.result.status, "iterations": fit.result.n_iter,
                       "diverged": fit.diverged}


def ising_metrics(truth, estimate, data, rng=None):
    """Recovery metrics, each tagged with how it was computed."""
    out = {}
    if truth is not None:
        if not isinstance(truth, IsingModel) or truth.d != estimate.d:
            raise UsageError("truth must be an Ising model of the same dimension")
        out["mse_J"] = {"value": mse_J(truth, estimate), "mode": EXACT}
        value, mode = corr_err(truth, estimate, rng)
        out["corr_err"] = {"value": value, "mode": mode}
    if data is not None and estimate.d <= MAX_ENUM_DIM:
        out["exact_loglik"] = {"value": exact_loglik(estimate, data), "mode": EXACT}
    return out


def cmd_fit(args):
    rng = np.random.default_rng(args.seed)
    data = read_dataset(args.data)
    truth = load_params(args.truth) if args.truth else None
    method = args.method
    t0 = time.perf_counter()
    if method in ISING_METHODS:
        if data.kind != "binary":
            raise UsageError(f"{method} needs binary data")
        model, info = _fit_ising(method, data, args, rng)
        kind = "ising"
    elif method in HOPFIELD_METHODS:
        if data.kind != "binary" or data.weights is not None:
            raise UsageError(f"{method} needs unweighted binary patterns")
        if method == "hopfield-mpf":
            model, res = hopfield.train_mpf(data.rows, _optimizer(args))
            info = {"status": res.status, "iterations": res.n_iter}
        elif method == "opr":
            model, info = hopfield.opr_train(data.rows), {}
        else:
            model, ok = hopfield.per_train(data.rows, args.eta, args.max_epochs)
            info = {"converged": ok, "per_variant": "symmetrized"}
        kind = "hopfield"
    else:
        if data.kind != "continuous":
            raise UsageError("pmpf needs continuous data")
        cfg = PmpfConfig(outer_iters=args.outer_iters, inner_descent_steps=args.inner_steps,
                         hmc=HmcConfig(args.leapfrog_steps, args.step_size))
        model, trace = pmpf_fit(IcaModel(np.eye(data.d)), data, cfg, rng)
        info = {"final_accept_rate": trace[-1]["accept_rate"]}
        kind = "ica"
    wall = time.perf_counter() - t0

    if kind == "ising":
        metrics = ising_metrics(truth, model, data, rng)
    elif kind == "hopfield":
        metrics = {"fixed_point_fraction": {"value": hopfield.fixed_point_fraction(model, data),
                                            "mode": EXACT}}
    else:
        metrics = {"exact_loglik": {"value": model.loglik(data)[0], "mode": EXACT}}
        if isinstance(truth, IcaModel):
            metrics["truth_loglik"] = {"value": truth.loglik(data)[0], "mode": EXACT}

    params_path = _out_path(args, "params.json")
    save_params(params_path, model)
    report = {"method": method, "model": kind, "params": params_path, "metrics": metrics,
              "fit": info, "wall_seconds": wall, "seed": args.seed, "config": _echo(args)}
    _write_json(_out_path(args, "report.json"), report)
    print(json.dumps(report, default=_json_default))
    return EXIT_OK


def cmd_eval(args):
    truth = load_params(args.truth)
    estimate = load_params(args.estimate)
    data = read_dataset(args.data) if args.data else None
    if type(truth) is not type(estimate) or truth.d != estimate.d:
        raise UsageError("truth and estimate must be the same model kind and dimension")
    if isinstance(truth, IsingModel):
        metrics = ising_metrics(truth, estimate, data)
    else:
        metrics = {"mse_params": {"value": float(np.mean((truth.params - estimate.params) ** 2)),
                                  "mode": EXACT}}
    out = {"metrics": metrics, "config": _echo(args)}
    _write_json(_out_path(args, "eval.json"), out)
    print(json.dumps(out, default=_json_default))
    return EXIT_OK


# ---------------------------------------------------------------------------
# hopfield experiments

CSV_COLUMNS = ("method", "n", "m", "x_variable", "x", "mean", "stderr", "trials")


def cmd_hopfield(args):
    rng = np.random.default_rng(args.seed)
    methods = tuple(args.methods)
    if args.n > 128:
        raise UsageError("n must be at most 128")
    if args.experiment == "capacity":
        m_values = args.m_values or list(range(1, args.n + 1, max(1, args.n // 8)))
        rows = hopfield.capacity_experiment(args.n, m_values, args.trials, methods, rng)
        for r in rows:
            r.update(x_variable="m", x=r["m"])
    elif args.experiment == "denoise":
        bits = args.corruption_bits or [0, 2, 4, 6, 8]
        rows = hopfield.denoise_experiment(args.n, args.m, bits, args.trials, methods, rng)
        for r in rows:
            r.update(x_variable="corruption_bits", x=r["corruption_bits"])
    else:
        rows = []
        for meth in methods:
            rows += hopfield.corrupted_storage_experiment(
                args.n, args.m, args.copies, args.corruption, args.trials, rng, method=meth)
        for r in rows:
            r.update(x_variable="corruption", x=r["corruption"])
    rows.sort(key=lambda r: (r["method"], r["x"]))
    path = _out_path(args, f"hopfield-{args.experiment}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args):
    names = args.only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown checks: {', '.join(unknown)}; choose from {', '.join(CHECKS)}")
    results = run_checks(names, seed=args.seed)
    for r in results:
        print(r.line(), file=sys.stderr)
    summary = {"passed": all(r.passed for r in results),
               "checks": [r.to_dict() for r in results], "config": _echo(args)}
    _write_json(_out_path(args, "verify.json"), summary)
    print(json.dumps(summary, default=_json_default))
    return EXIT_OK if summary["passed"] else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", default=".", help="output directory (default .)")
    common.add_argument("--config", help="JSON file of defaults; explicit flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mpflearn",
                                description="Minimum probability flow learning toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic data")
    g.add_argument("kind", choices=("ising", "hopfield-patterns", "ica"))
    g.add_argument("--lattice", default="4x4")
    g.add_argument("--sigma2", type=float, default=10.0)
    g.add_argument("--samples", type=int, default=20000)
    g.add_argument("--n", type=int, default=32)
    g.add_argument("--m", type=int, default=32)
    g.add_argument("--k", type=int, default=2)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", parents=[common], help="fit a model")
    f.add_argument("--method", required=True, choices=ALL_METHODS)
    f.add_argument("--data", required=True)
    f.add_argument("--truth")
    f.add_argument("--max-iter", type=int, default=500)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--lr-start", type=float, default=3.0)
    f.add_argument("--lr-end", type=float, default=0.1)
    f.add_argument("--batch-size", type=int, default=100)
    f.add_argument("--epochs", type=int, default=10)
    f.add_argument("--eta", type=float, default=1.0)
    f.add_argument("--max-epochs", type=int, default=1000)
    f.add_argument("--outer-iters", type=int, default=50)
    f.add_argument("--inner-steps", type=int, default=10)
    f.add_argument("--leapfrog-steps", type=int, default=20)
    f.add_argument("--step-size", type=float, default=0.1)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", parents=[common], help="compare estimate to truth")
    e.add_argument("--truth", required=True)
    e.add_argument("--estimate", required=True)
    e.add_argument("--data")
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("hopfield", parents=[common], help="Hopfield experiments")
    h.add_argument("experiment", choices=("capacity", "denoise", "corrupted-storage"))
    h.add_argument("--n", type=int, default=32)
    h.add_argument("--m", type=int, default=4)
    h.add_argument("--m-values", type=int, nargs="+")
    h.add_argument("--corruption-bits", type=int, nargs="+")
    h.add_argument("--corruption", type=float, default=0.2)
    h.add_argument("--copies", type=int, default=200)
    h.add_argument("--trials", type=int, default=20)
    h.add_argument("--methods", nargs="+", default=list(hopfield.METHODS),
                   choices=hopfield.METHODS)
    h.set_defaults(func=cmd_hopfield)

    v = sub.add_parser("verify", parents=[common], help="run verification checks")
    v.add_argument("--only", nargs="+", metavar="CHECK")
    v.set_defaults(func=cmd_verify)
    return p, {"gen": g, "fit": f, "eval": e, "hopfield": h, "verify": v}


def parse_args(argv=None):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a JSON object")
        sub = subs[args.command]
        known = {a.dest for a in sub._actions}
        bad = sorted(k.replace("-", "_") for k in cfg if k.replace("-", "_") not in known)
        if bad:
            parser.error(f"unknown config keys: {', '.join(bad)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mpflearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"mpflearn: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
