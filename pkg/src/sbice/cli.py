"""Command-line entry point.

    sbice simulate|infer|generate|evaluate|report --config <path>
          [--resume] [--threads N] [--regime posterior|prior|both]

Exit codes: 0 success, 2 configuration error, 3 runtime/simulation error,
4 worker-protocol error. SBICE_THREADS overrides --threads.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import (ConfigurationError, SbiceError, SimulationError,
                     WorkerProtocolError)
from .runner import REGIMES, Runner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbice",
        description="Infer a posterior over data-generating-process "
                    "parameters from a source dataset, generate "
                    "posterior-weighted synthetic datasets, and benchmark "
                    "causal-effect estimators on them.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("simulate", "write (or ingest) the source dataset"),
            ("infer", "run SMC-ABC against the source"),
            ("generate", "emit posterior/prior datasets"),
            ("evaluate", "compute classifier AUC and mean BSE"),
            ("report", "render summary.md"),
            ("run", "simulate, infer, generate both regimes, evaluate, "
                    "report")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON "
                                                         "run configuration")
        cmd.add_argument("--threads", type=int, default=1,
                         help="parallel lanes (SBICE_THREADS overrides)")
        if name == "infer":
            cmd.add_argument("--resume", action="store_true",
                             help="continue from the last sealed generation")
        if name == "generate":
            cmd.add_argument("--regime", choices=(*REGIMES, "both"),
                             default="both")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads
    env_threads = os.environ.get("SBICE_THREADS")
    if env_threads:
        try:
            threads = int(env_threads)
        except ValueError:
            print(f"sbice: SBICE_THREADS={env_threads!r} is not an integer",
                  file=sys.stderr)
            return 2
    try:
        config = load_config(args.config)
        runner = Runner(config, threads=threads)
        if args.command == "simulate":
            source = runner.cmd_simulate()
            print(f"source.csv written: n={source.n}, p={source.p}")
        elif args.command == "infer":
            result = runner.cmd_infer(resume=args.resume)
            final = result.final_population
            print(f"inference done: {len(result.populations)} generations, "
                  f"{result.simulation_count} simulations, "
                  f"reason={result.termination_reason}, "
                  f"final epsilon={final.epsilon:.6g}")
        elif args.command == "generate":
            regimes = REGIMES if args.regime == "both" else (args.regime,)
            for regime in regimes:
                generated = runner.cmd_generate(regime)
                print(f"{regime}: {len(generated)} datasets written")
        elif args.command == "evaluate":
            metrics = runner.cmd_evaluate()
            for regime in REGIMES:
                auc = metrics["auc"][regime]
                print(f"{regime}: AUC {auc['mean']:.3f} +/- {auc['sd']:.3f}")
        elif args.command == "report":
            runner.cmd_report()
            print(f"summary.md written to {runner.root}")
        else:
            runner.cmd_simulate()
            runner.cmd_infer()
            for regime in REGIMES:
                runner.cmd_generate(regime)
            runner.cmd_evaluate()
            runner.cmd_report()
            print(f"pipeline complete in {runner.root}")
    except ConfigurationError as exc:
        print(f"sbice: configuration error: {exc}", file=sys.stderr)
        return 2
    except WorkerProtocolError as exc:
        print(f"sbice: worker protocol error: {exc}", file=sys.stderr)
        return 4
    except (SimulationError, SbiceError) as exc:
        print(f"sbice: error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
