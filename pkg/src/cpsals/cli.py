"""Command-line interface.

Subcommands::

    cpsals decompose  --input t.coo --rank 5 --reg 1e-3 --sweeps 100 \
                      --tol 1e-8 --seed 0 --out factors/ --trace trace.csv
    cpsals sals       --source source.json --rank 5 --reg 1e-3 \
                      --step decr:1.0 --batch 10 --blocks 500 --seed 0 \
                      --trace trace.csv [--check-bounds]
    cpsals experiment {convergence|sparsity|efficiency} --config cfg.json \
                      --out results/

Exit codes: 0 success, 1 usage/config error, 2 numerical or monitor failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .als import AlsConfig, als_run
from .harness import ExperimentConfig, build_source, run_experiment
from .kruskal import save_factors
from .sals import MonitorViolation, SalsConfig, StepSchedule, sals_run
from .tensors import read_coo
from .trace import write_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on bad flags, not argparse's default 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cpsals", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    dec = sub.add_parser("decompose", help="regularized ALS on a COO tensor file")
    dec.add_argument("--input", required=True, help="COO text file")
    dec.add_argument("--rank", required=True, type=int)
    dec.add_argument("--reg", type=float, default=1e-3, help="regularization weight")
    dec.add_argument("--sweeps", type=int, default=100, help="sweep budget")
    dec.add_argument("--tol", type=float, default=1e-8, help="gradient tolerance")
    dec.add_argument("--seed", type=int, default=0)
    dec.add_argument("--out", default=None, help="directory for factor files")
    dec.add_argument("--trace", default=None, help="per-sweep trace CSV")
    dec.add_argument("--no-wall", action="store_true", help="omit wall_ns column")

    sal = sub.add_parser("sals", help="stochastic ALS against a sampled source")
    sal.add_argument("--source", required=True, help="JSON source spec")
    sal.add_argument("--rank", required=True, type=int)
    sal.add_argument("--reg", type=float, default=1e-3)
    sal.add_argument("--step", default="decr:1.0", help="const:c or decr:c")
    sal.add_argument("--batch", type=int, default=1, help="samples per block")
    sal.add_argument("--blocks", type=int, default=100, help="block budget")
    sal.add_argument("--seed", type=int, default=0, help="model init seed")
    sal.add_argument("--trace", default=None, help="per-block trace CSV")
    sal.add_argument("--check-bounds", action="store_true",
                     help="enable the iterate-bound monitor (c <= 1 schedules)")
    sal.add_argument("--out", default=None, help="directory for factor files")
    sal.add_argument("--no-wall", action="store_true", help="omit wall_ns column")

    exp = sub.add_parser("experiment", help="run a canned study")
    exp.add_argument("name", choices=("convergence", "sparsity", "efficiency"))
    exp.add_argument("--config", required=True, help="JSON experiment config")
    exp.add_argument("--out", default=None, help="output directory")
    exp.add_argument("--workers", type=int, default=None,
                     help="parallel replicate processes")
    return parser


def _cmd_decompose(args) -> int:
    tensor = read_coo(args.input)
    cfg = AlsConfig(
        lam=args.reg, max_sweeps=args.sweeps, tol_grad=args.tol, seed=args.seed
    )
    model, rows = als_run(tensor, cfg, args.rank)
    if args.out:
        save_factors(model, args.out)
    if args.trace:
        write_trace(args.trace, rows, include_wall=not args.no_wall)
    last = rows[-1]
    print(
        f"decompose: {len(rows)} sweeps, objective {last.sampled_objective:.6e}, "
        f"max grad norm {last.grad_norm:.3e}"
    )
    return EXIT_OK


def _cmd_sals(args) -> int:
    with open(args.source, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    source = build_source(spec)
    cfg = SalsConfig(
        lam=args.reg,
        rank=args.rank,
        schedule=StepSchedule.parse(args.step),
        batch_size=args.batch,
        max_blocks=args.blocks,
        seed=args.seed,
        check_bounds=args.check_bounds,
    )
    model, rows = sals_run(source, cfg)
    if args.out:
        save_factors(model, args.out)
    if args.trace:
        write_trace(args.trace, rows, include_wall=not args.no_wall)
    last = rows[-1]
    residual = "" if last.exact_residual is None else f", residual {last.exact_residual:.6e}"
    print(
        f"sals: {len(rows)} blocks, batch objective "
        f"{last.sampled_objective:.6e}{residual}"
    )
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.workers is not None:
        if args.workers < 1:
            raise _UsageError("--workers must be >= 1")
        cfg = ExperimentConfig.from_dict(
            {
                "experiment": cfg.experiment,
                "source": cfg.source,
                "solver": _solver_dict(cfg),
                "budget": cfg.budget,
                "replicates": cfg.replicates,
                "workers": args.workers,
                "suppress_wall": cfg.suppress_wall,
                "out": cfg.out,
            }
        )
    if cfg.experiment != args.name:
        raise _UsageError(
            f"config names experiment {cfg.experiment!r}, command asked for {args.name!r}"
        )
    paths = run_experiment(cfg, args.out)
    for arm, path in paths.items():
        print(f"{arm}: {path}")
    return EXIT_OK


def _solver_dict(cfg: ExperimentConfig) -> dict:
    s = cfg.solver
    rule = "const" if s.schedule.rule == "constant" else "decr"
    return {
        "lambda": s.lam,
        "rank": s.rank,
        "schedule": f"{rule}:{s.schedule.c}",
        "batch_sizes": list(s.batch_sizes),
        "max_blocks": s.max_blocks,
        "tol": s.tol,
        "seed": s.seed,
    }


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "decompose":
            return _cmd_decompose(args)
        if args.command == "sals":
            return _cmd_sals(args)
        return _cmd_experiment(args)
    except _UsageError as exc:
        print(f"cpsals: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MonitorViolation, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"cpsals: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"cpsals: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
