"""Command-line entry point: ``sparsediff <subcommand> [options]``.

Exit codes: 0 success, 1 validation error (including bad usage), 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench
from .factors import factor_report
from .model_sim import ModelSpec, PathFormatError, generate_covariates, load_path, save_path, simulate_fine
from .quasi_lik import j_matrix, score_decomposition, score_report
from .selector import estimate, gamma_n

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if item:
            out.append(math.inf if item.lower() in ("inf", "infinity") else float(item))
    return out


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _vec(a):
    return [float(v) for v in np.asarray(a).ravel()]


def _emit(obj):
    print(json.dumps(obj, indent=2, default=_vec))


def _spec_from_config(cfg, n=None):
    n = cfg.n_grid[0] if n is None else n
    idx = cfg.n_grid.index(n) if n in cfg.n_grid else 0
    theta0 = bench.theta0_for(cfg, idx)
    p = bench.p_for(cfg, n)
    if theta0.size != p:
        theta0 = np.resize(theta0, p) * (np.arange(p) < theta0.size)
    return ModelSpec(p, n, theta0, drift=cfg.drift, cov_bound=cfg.cov_bound, x0=cfg.x0,
                     substeps=cfg.substeps, covariates=cfg.covariates,
                     ou_rate=cfg.ou_rate, ou_vol=cfg.ou_vol)


def cmd_simulate(args):
    cfg = bench.load_config(args.config)
    spec = _spec_from_config(cfg, args.n)
    seed = args.seed if args.seed is not None else cfg.master_seed
    record = simulate_fine(spec, generate_covariates(spec, seed), seed)
    save_path(record.observed(), args.out)
    print(f"wrote {args.out} (n={spec.n}, p={spec.p}, seed={seed})")
    return EXIT_OK


def cmd_score(args):
    if args.config is not None:
        cfg = bench.load_config(args.config)
        spec = _spec_from_config(cfg, args.n)
        seed = args.seed if args.seed is not None else cfg.master_seed
        record = simulate_fine(spec, generate_covariates(spec, seed), seed)
        path = record.observed()
        theta = spec.theta0 if args.theta is None else np.array(_floats(args.theta))
    elif args.path is not None:
        record = None
        path = load_path(args.path)
        theta = np.zeros(path.p) if args.theta is None else np.array(_floats(args.theta))
    else:
        raise ValueError("score needs --path or --config")
    rep = score_report(path, theta)
    out = {"psi": rep.psi, "psi_sup": float(np.max(np.abs(rep.psi))), "epsilon_n": rep.epsilon_n,
           "theta": rep.theta_eval}
    if record is not None:
        dec = score_decomposition(record, theta)
        out["decomposition"] = {k: getattr(dec, k) for k in "abcde"}
    _emit(out)
    return EXIT_OK


def cmd_estimate(args):
    path = load_path(args.path)
    if args.gamma is not None:
        gamma = args.gamma
    elif args.config is not None:
        gamma = gamma_n(bench.load_config(args.config).tuning, path.n)
    else:
        raise ValueError("estimate needs --gamma or --config")
    res = estimate(path, gamma)
    _emit({"theta_hat": res.theta_hat, "gamma": res.gamma, "feasible": res.feasible,
           "objective": res.objective, "iterations": res.iterations,
           "solver_status": res.solver_status, "constraint_sup": res.constraint_sup})
    return EXIT_OK


def cmd_factors(args):
    if (args.path is None) == (args.matrix is None):
        raise ValueError("factors needs exactly one of --path and --matrix")
    if args.path is not None:
        J = j_matrix(load_path(args.path))
    else:
        J = np.loadtxt(args.matrix, ndmin=2)
    rep = factor_report(J, _ints(args.support), qs=_floats(args.q), method=args.method,
                        seed=args.seed or 0)
    _emit({"support": [int(i) for i in rep.support], "kappa": rep.kappa, "re": rep.re,
           "f_q": {("inf" if math.isinf(q) else f"{q:g}"): v for q, v in rep.f_q.items()},
           "method": rep.method, "ordering": rep.ordering,
           "certificate": {k: _vec(v) for k, v in rep.certificate.items()}})
    return EXIT_OK


def cmd_experiment(args):
    cfg = bench.load_config(args.config)
    if args.seed is not None:
        cfg = bench.ExperimentConfig(**{**cfg.__dict__, "master_seed": args.seed})
    out = Path(args.out if args.out is not None else cfg.output)
    records = bench.run_experiment(cfg, out)
    bad = sum(str(r["solver_status"]).startswith("error") for r in records)
    print(f"{len(records)} records written to {out}" + (f" ({bad} failed, see errors.log)" if bad else ""))
    return EXIT_OK


def cmd_verify(args):
    records, constants = bench.read_records(args.records)
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_INVALID
    rep = bench.verify_bounds(records, constants)
    for line in rep.lines():
        print(line)
    return EXIT_OK


def cmd_plot(args):
    if args.summary is not None:
        rows = bench.read_summary(args.summary)
    elif args.records is not None:
        records, constants = bench.read_records(args.records)
        rows = bench.summarize(records, constants) if records else []
    else:
        raise ValueError("plot needs --summary or --records")
    if not rows:
        print("no records", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    for dest in bench.write_plots(rows, out):
        print(f"wrote {dest}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="sparsediff", description="Sparse diffusion-coefficient estimation toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one observed path and write it to a path file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="observation count (default: first entry of n_grid)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="score, epsilon_n and (with --config) the score decomposition")
    p.add_argument("--path")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--theta", help="comma-separated evaluation point")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("estimate", help="run the selector on a path file")
    p.add_argument("--path", required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--config", help="take gamma from the config's tuning rule")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("factors", help="cone-restricted factors of J_n or of a matrix file")
    p.add_argument("--path")
    p.add_argument("--matrix", help="whitespace-separated square matrix")
    p.add_argument("--support", required=True, help="comma-separated 0-based indices")
    p.add_argument("--q", default="2,inf")
    p.add_argument("--method", choices=("auto", "random"), default="auto")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_factors)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", help="override the output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="audit the error bounds on a records CSV")
    p.add_argument("--records", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="regenerate SVG plots from summary or records CSV")
    p.add_argument("--summary")
    p.add_argument("--records")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_INVALID
    try:
        return args.func(args)
    except PathFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
