"""Command-line interface.

Every subcommand accepts ``--seed`` and ``--config`` (flat JSON). Values
given as flags override the config file, which overrides the defaults
listed in ``--help``. Output CSVs start with ``#`` comment lines holding
the package version, the seed and the effective configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .estimators import spawn_streams
from .harness.datasets import BUNDLED, DatasetSpec, bundled_dataset, load_dataset, load_features
from .harness.oracle import quadrature_marginal
from .harness.studies import acceptance_benchmark, r_study, r_statistic
from .harness.synthetic import gen_synthetic
from .kernel import Hyperparams, NumericalError, gram
from .pm_mcmc import EstimatorConfig, RunConfig, marginal_estimator, run_chains
from .predict import predictive, sample_latents

EXIT_ARGS = 2
EXIT_NUMERICAL = 3

DEFAULTS = {
    "synth": {"n": 100, "sigma": 20.0, "tau": 0.255, "seed": 0, "out": None},
    "estimate": {"method": "ais-approx", "n_imp": 1, "theta": None, "reps": 1, "seed": 0},
    "fit": {"cov": "iso", "method": "ais-approx", "n_imp": 1, "chains": 5, "iters": 2000,
            "burnin": 500, "warmup": 2000, "seed": 0, "out": None},
    "predict": {"burnin": 500, "max_samples": 200, "ess_iters": 10, "seed": 0, "out": None},
    "rstudy": {"n_list": [10, 50, 100, 500, 1000], "methods": ["is", "ais-prior", "ais-approx"],
               "n_imp": 4, "n_theta": 50, "reps": 50, "seed": 0, "out": None},
    "bench": {"cov": "iso", "method": "ais-approx", "n_imp": 1, "chains": 5, "iters": 2000,
              "burnin": 500, "warmup": 2000, "seed": 0, "out": None},
    "oracle": {"theta": None, "seed": 0},
}


class CliError(Exception):
    pass


def _data_options(p, required=True):
    p.add_argument("--data", required=required,
                   help=f"CSV path or bundled dataset name ({', '.join(sorted(BUNDLED))})")
    p.add_argument("--label-column", default="class")
    p.add_argument("--positive", action="append", default=None,
                   help="label value mapped to +1 (repeatable); default expects -1/+1 labels")
    p.add_argument("--glass-classes", action="store_true",
                   help="labels are UCI glass types; types 1-4 become +1")
    p.add_argument("--no-normalize", action="store_true", help="keep features unstandardized")


def build_parser():
    parser = argparse.ArgumentParser(prog="pmgpc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        d = DEFAULTS[name]
        p = sub.add_parser(name, help=help_,
                           epilog="defaults: " + json.dumps(d),
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--config", help="flat JSON file of option values")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes; results do not depend on it")
        return p

    p = add("synth", "generate a synthetic dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--out")

    p = add("estimate", "log marginal likelihood estimates and the r statistic")
    _data_options(p)
    p.add_argument("--method", choices=["is", "ais-prior", "ais-approx"])
    p.add_argument("--n-imp", type=int)
    p.add_argument("--theta", help="sigma,tau[,tau...] on the natural scale")
    p.add_argument("--reps", type=int)

    p = add("fit", "run pseudo-marginal chains over the covariance parameters")
    _data_options(p)
    p.add_argument("--cov", choices=["iso", "ard"])
    p.add_argument("--method", choices=["is", "ais-prior", "ais-approx"])
    p.add_argument("--n-imp", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--out")

    p = add("predict", "predictive probabilities from a chain CSV")
    _data_options(p)
    p.add_argument("--chain", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--burnin", type=int)
    p.add_argument("--max-samples", type=int)
    p.add_argument("--ess-iters", type=int)
    p.add_argument("--out")

    p = add("rstudy", "variance study of the estimators on synthetic data")
    p.add_argument("--out")

    p = add("bench", "acceptance-rate benchmark row")
    _data_options(p)
    p.add_argument("--cov", choices=["iso", "ard"])
    p.add_argument("--method", choices=["is", "ais-prior", "ais-approx"])
    p.add_argument("--n-imp", type=int)
    p.add_argument("--out")

    p = add("oracle", "quadrature marginal likelihood (n <= 3)")
    _data_options(p)
    p.add_argument("--theta", help="sigma,tau[,tau...] on the natural scale")
    return parser


def effective_config(args):
    """Merge defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise CliError("config file must hold a flat JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _load(args):
    if args.data in BUNDLED and not os.path.exists(args.data):
        return bundled_dataset(args.data)
    spec = DatasetSpec(
        label_column=args.label_column,
        positive=frozenset(args.positive or ()),
        glass_classes=args.glass_classes,
        normalize=not args.no_normalize,
        name=os.path.splitext(os.path.basename(args.data))[0],
    )
    try:
        return load_dataset(args.data, spec)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load {args.data}: {exc}") from exc


def _theta(text, d):
    if text is None:
        raise CliError("--theta is required")
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError as exc:
        raise CliError(f"malformed --theta {text!r}") from exc
    if len(values) < 2 or min(values) <= 0 or len(values) - 1 not in (1, d):
        raise CliError("--theta must be sigma,tau or sigma,tau_1..tau_d with positive values")
    return Hyperparams.from_natural(values[0], values[1:])


def _header(cfg):
    # the output path is left out so reruns into another file stay byte-identical
    shown = {k: v for k, v in cfg.items() if k != "out"}
    return [f"# pmgpc {__version__}", f"# seed {cfg.get('seed')}",
            "# config " + json.dumps(shown, sort_keys=True, default=str)]


def _emit(cfg, header_row, rows, out):
    buf = io.StringIO()
    for line in _header(cfg):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header_row)
    w.writerows(rows)
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args, cfg):
    data = gen_synthetic(cfg["n"], cfg["sigma"], cfg["tau"], seed=cfg["seed"])
    rows = [[repr(float(a)), repr(float(b)), int(lab)] for (a, b), lab in zip(data.X, data.y)]
    _emit(cfg, ["x1", "x2", "class"], rows, cfg["out"])


def cmd_estimate(args, cfg):
    data = _load(args)
    theta = _theta(cfg["theta"], data.d)
    config = EstimatorConfig(method=cfg["method"], n_imp=cfg["n_imp"])
    fn = marginal_estimator(data, theta, config)
    if fn is None:
        raise NumericalError("Laplace approximation failed", theta)
    values = [fn(r) for r in spawn_streams(np.random.default_rng(cfg["seed"]), cfg["reps"])]
    rows = [[i, repr(float(v)), repr(float(v / np.log(10.0)))] for i, v in enumerate(values)]
    _emit(cfg, ["rep", "log_estimate", "log10_estimate"], rows, None)
    if cfg["reps"] >= 2:
        r = r_statistic(data, theta, config, cfg["reps"], np.random.default_rng(cfg["seed"]))
        print(f"# r {float(r)!r}")


def cmd_fit(args, cfg):
    data = _load(args)
    config = RunConfig(
        estimator=EstimatorConfig(method=cfg["method"], n_imp=cfg["n_imp"]),
        ard=cfg["cov"] == "ard",
        n_chains=cfg["chains"],
        n_iter=cfg["iters"],
        burn_in=cfg["burnin"],
        warmup_iters=cfg["warmup"],
        seed=cfg["seed"],
        n_jobs=max(1, args.threads),
    )
    records, prop = run_chains(data, config)
    p = records[0].thetas.shape[1]
    header = ["iteration", "chain_id", "log_sigma"] + [f"log_tau_{i}" for i in range(1, p)]
    header += ["log_estimate", "accepted"]
    rows = []
    for rec in records:
        for t in range(rec.thetas.shape[0]):
            rows.append([t, rec.chain_id] + [repr(float(v)) for v in rec.thetas[t]]
                        + [repr(float(rec.log_estimates[t])), int(rec.accept_flags[t])])
    _emit(cfg, header, rows, cfg["out"])
    for rec in records:
        logging.info("chain %d acceptance %.3f", rec.chain_id, rec.acceptance_rate)


def read_chain_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header = rows[0]
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    cols = {h: i for i, h in enumerate(header)}
    theta_cols = [cols["log_sigma"]] + [i for h, i in cols.items() if h.startswith("log_tau_")]
    return body[:, cols["iteration"]], body[:, theta_cols]


def cmd_predict(args, cfg):
    data = _load(args)
    iters, thetas = read_chain_csv(args.chain)
    thetas = thetas[iters >= cfg["burnin"]]
    if thetas.shape[0] == 0:
        raise CliError("no chain rows after burn-in")
    step = max(1, int(np.ceil(thetas.shape[0] / cfg["max_samples"])))
    thetas = thetas[::step]
    spec = DatasetSpec(label_column=args.label_column)
    X_star = load_features(args.test, data, spec)
    f = sample_latents(thetas, data, cfg["ess_iters"], np.random.default_rng(cfg["seed"]))
    mean, se = predictive(X_star, f, thetas, data)
    rows = [[i, repr(float(m)), repr(float(s))] for i, (m, s) in enumerate(zip(mean, se))]
    _emit(cfg, ["test_index", "mean_prob", "mc_std_error"], rows, cfg["out"])


def cmd_rstudy(args, cfg):
    results = r_study(cfg["n_list"], cfg["methods"], cfg["n_imp"], cfg["seed"],
                      cfg["n_theta"], cfg["reps"], n_jobs=max(1, args.threads))
    rows = [[res.method, res.n, i, repr(float(r))]
            for res in results for i, r in enumerate(res.r_values)]
    _emit(cfg, ["method", "n", "theta_index", "r"], rows, cfg["out"])


def cmd_bench(args, cfg):
    data = _load(args)
    row = acceptance_benchmark(data, cfg["cov"], cfg["method"], cfg["n_imp"], cfg["seed"],
                               cfg["chains"], cfg["iters"], cfg["burnin"], cfg["warmup"],
                               n_jobs=max(1, args.threads))
    header = ["dataset", "covariance", "method", "n_imp", "mean_acceptance", "sd_acceptance",
              "cell"] + [f"chain_{i}" for i in range(len(row.per_chain))]
    body = [row.dataset, row.covariance, row.method, row.n_imp, repr(row.mean), repr(row.sd),
            row.cell] + [repr(r) for r in row.per_chain]
    _emit(cfg, header, [body], cfg["out"])


def cmd_oracle(args, cfg):
    data = _load(args)
    if data.n > 3:
        raise CliError(f"oracle supports n <= 3, got n = {data.n}")
    theta = _theta(cfg["theta"], data.d)
    value = quadrature_marginal(data, gram(data.X, theta))
    for line in _header(cfg):
        print(line)
    print(repr(value))


COMMANDS = {
    "synth": cmd_synth,
    "estimate": cmd_estimate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "rstudy": cmd_rstudy,
    "bench": cmd_bench,
    "oracle": cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
        COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"pmgpc {args.command}: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except NumericalError as exc:
        print(f"pmgpc {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
