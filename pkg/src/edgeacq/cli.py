"""Command-line interface: run experiments, validate configs, merge traces.

Exit codes: 0 success, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .harness import (
    ConfigError,
    load_config,
    run_experiment,
    summarize_traces,
    write_trace_csv,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeacq",
        description="Importance-aware retransmission/scheduling experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("--config", required=True, help="experiment config file (INI)")
    run_p.add_argument("--seed-list", help="comma-separated seed override")
    run_p.add_argument("--out", help="output directory override")
    run_p.add_argument("--mode", help="experiment mode override")

    val_p = sub.add_parser("validate", help="check a config without running it")
    val_p.add_argument("--config", required=True)

    sum_p = sub.add_parser("summarize", help="aggregate existing trace CSVs")
    sum_p.add_argument("traces", nargs="+", help="trace CSV files")
    sum_p.add_argument("--out", default=".", help="directory for the merged summary")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = load_config(args.config)
            print(f"config ok: mode={config.mode}, {len(config.seeds)} seeds")
            return 0

        if args.command == "run":
            config = load_config(args.config)
            if args.seed_list:
                seeds = tuple(int(tok) for tok in args.seed_list.split(",") if tok)
                config = replace(config, seeds=seeds)
            if args.mode:
                config = replace(config, mode=args.mode)
            if args.out:
                config = replace(config, out_dir=args.out)
            config.validate()
            summary = run_experiment(config)
            print(f"wrote {len(summary.trace_paths)} traces to {config.out_dir}")
            print(f"summary: {os.path.join(config.out_dir, 'summary.csv')}")
            return 0

        # summarize
        for path in args.traces:
            if not os.path.exists(path):
                raise ConfigError("traces", f"file not found: {path}")
        rows = summarize_traces(args.traces)
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "summary.csv")
        write_trace_csv(
            out_path,
            ("policy", "checkpoint", "mean_accuracy", "std_accuracy", "n_runs"),
            rows,
        )
        print(f"summary: {out_path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
