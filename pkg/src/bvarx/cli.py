"""Command line entry points.

Subcommands: simulate, sample, diagnose, check (plus serve, which starts the
HTTP service).  Exit codes: 0 success, 2 propriety failure, 3 configuration
error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .diagnostics import InadmissibleBound
from .experiment import (
    ConfigError,
    ProprietyError,
    check_verdicts,
    config_with,
    diagnose_workflow,
    load_config,
    load_path,
    sample_workflow,
    simulate_workflow,
)
from .linalg import NotSpdError
from .model import NumericDataError

EXIT_OK = 0
EXIT_PROPRIETY = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


def _parser():
    p = argparse.ArgumentParser(
        prog="bvarx",
        description=(
            "Collapsed Gibbs sampling for Bayesian vector autoregressions "
            "with predictors, with explicit convergence-rate certificates."
        ),
    )
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument("--t-rule", choices=["theorem", "caption"],
                        help="small-set bound rule for the certificates")
    common.add_argument("--iters", type=int, help="Gibbs sweeps per chain")
    common.add_argument("--burn", type=int, help="discarded initial sweeps")
    common.add_argument("--chains", type=int, help="number of chains")

    sub.add_parser("simulate", parents=[common],
                   help="simulate one stable VARX path and write data.csv")
    sub.add_parser("sample", parents=[common],
                   help="run Gibbs chains on the simulated path and summarize")
    sub.add_parser("diagnose", parents=[common],
                   help="compute both certificate routes over the n grid")
    sub.add_parser("check", parents=[common],
                   help="report posterior propriety for every n in the grid")

    serve = sub.add_parser("serve", parents=[common], help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return p


def _config_from_args(args):
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "t_rule": getattr(args, "t_rule", None),
        "iters": args.iters,
        "burn": args.burn,
        "chains": args.chains,
    }
    cfg = load_config(args.config)
    return config_with(cfg, **overrides)


def _cmd_simulate(cfg):
    paths = simulate_workflow(cfg)
    print(f"wrote {paths['data']} and {paths['truth']}")
    return EXIT_OK


def _cmd_check(cfg):
    ds, _ = load_path(cfg)
    all_proper = True
    for n, verdict in check_verdicts(cfg, ds):
        status = "proper" if verdict.proper else "IMPROPER"
        print(f"n={n}: {status} (set1={verdict.condition_set_1}, "
              f"set2={verdict.condition_set_2})")
        for clause, ok in sorted(verdict.details.items()):
            print(f"  {clause}: {ok}")
        all_proper = all_proper and verdict.proper
    return EXIT_OK if all_proper else EXIT_PROPRIETY


def _cmd_sample(cfg):
    result = sample_workflow(cfg)
    print(f"wrote {result['summary']} and {len(result['traces'])} trace file(s)")
    for row in result["rows"]:
        print(f"  {row['coordinate']}: mean={row['mean']:.6g} "
              f"mcse={row['mcse']:.3g} rhat={row['rhat']:.4g}")
    return EXIT_OK


def _cmd_diagnose(cfg):
    result = diagnose_workflow(cfg)
    ok_rows = sum(1 for row in result["rows"] if not np.isnan(row["lambda_large"]))
    if result["crossover_n"] is not None:
        print(f"smallest n in grid with drift coefficient < 1: {result['crossover_n']}")
    else:
        print("no n in grid has drift coefficient < 1")
    print(f"wrote {result['experiment']}, {result['bounds']} and "
          f"{len(result['plots'])} plot(s); {ok_rows}/{len(result['rows'])} "
          "grid points succeeded")
    return EXIT_OK if ok_rows else EXIT_PROPRIETY


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "check":
            return _cmd_check(cfg)
        if args.command == "sample":
            return _cmd_sample(cfg)
        if args.command == "diagnose":
            return _cmd_diagnose(cfg)
        if args.command == "serve":
            import uvicorn

            from .service import app

            uvicorn.run(app, host=args.host, port=args.port)
            return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProprietyError as exc:
        print(f"propriety failure: {exc}", file=sys.stderr)
        return EXIT_PROPRIETY
    except (NotSpdError, InadmissibleBound, NumericDataError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
