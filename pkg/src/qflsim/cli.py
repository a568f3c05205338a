"""Command-line experiment runner.

Subcommands:
    run              execute one configured experiment, write metrics/summary
    compare          run two configs and print a side-by-side summary
    report           render an SVG line chart from a metrics.csv
    validate-config  check a config file and exit

Exit codes: 0 success, 2 config error, 3 runtime error. The output directory
defaults to runs/<config-stem>; --out-dir overrides it, and the QFLSIM_OUT_DIR
environment variable overrides the default for both commands that write.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .federation import run_experiment
from .metrics import persist_metrics, summary_dict
from .report import report_from_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

logger = logging.getLogger(__name__)


def _default_out_dir(config_path: Path) -> Path:
    env = os.environ.get("QFLSIM_OUT_DIR")
    base = Path(env) if env else Path("runs")
    return base / config_path.stem


def _run_one(config_path: Path, config: ExperimentConfig, out_dir: Path, traces: bool) -> dict:
    result = run_experiment(config)
    paths = persist_metrics(
        result.metrics,
        config.raw,
        out_dir,
        device_traces=result.device_traces if traces else None,
    )
    summary = summary_dict(result.metrics, config.raw)
    print(f"[{config.protocol}] {config_path} -> {out_dir}")
    for m in result.metrics:
        print(
            f"  round {m.round}: trainings={m.trainings} comm_events={m.comm_events} "
            f"val_loss={m.server_val_loss:.4f} val_acc={m.server_val_acc:.3f} "
            f"test_acc={m.server_test_acc:.3f}"
        )
    print(f"  wrote {paths['metrics']} and {paths['summary']}")
    return summary


def cmd_run(args) -> int:
    config_path = Path(args.config)
    config = load_config(config_path)
    out_dir = Path(args.out_dir) if args.out_dir else _default_out_dir(config_path)
    _run_one(config_path, config, out_dir, args.device_traces)
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = []
    out_root = Path(args.out_dir) if args.out_dir else _default_out_dir(Path("compare"))
    for tag, path_str in (("a", args.a), ("b", args.b)):
        config_path = Path(path_str)
        config = load_config(config_path)
        summary = _run_one(config_path, config, out_root / f"{tag}_{config_path.stem}", False)
        rows.append(
            {
                "config": str(config_path),
                "protocol": config.protocol,
                "trainings": summary["totals"]["trainings"],
                "comm_events": summary["totals"]["comm_events"],
                "modeled_t_total": summary["totals"]["modeled_t_total"],
                "wall_clock": summary["totals"]["wall_clock"],
                "final_val_acc": summary["final"]["server_val_acc"],
                "final_test_acc": summary["final"]["server_test_acc"],
            }
        )
    header = (
        f"{'config':<28} {'proto':<6} {'train':>6} {'comm':>6} "
        f"{'modeled_T':>10} {'wall_s':>8} {'val_acc':>8} {'test_acc':>9}"
    )
    print(header)
    print("-" * len(header))
    for row in rows:
        print(
            f"{Path(row['config']).name:<28} {row['protocol']:<6} {row['trainings']:>6} "
            f"{row['comm_events']:>6} {row['modeled_t_total']:>10.2f} {row['wall_clock']:>8.2f} "
            f"{row['final_val_acc']:>8.3f} {row['final_test_acc']:>9.3f}"
        )
    out_root.mkdir(parents=True, exist_ok=True)
    compare_path = out_root / "compare.json"
    compare_path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    print(f"wrote {compare_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    columns = [c.strip() for c in args.columns.split(",")] if args.columns else None
    out = report_from_csv(args.in_path, args.out_path, columns)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(Path(args.config))
    print(f"{args.config}: valid ({config.protocol}, {config.n_devices} devices, {config.rounds} rounds)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qflsim", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True, help="path to a JSON experiment config")
    p_run.add_argument("--out-dir", default=None, help="output directory (default runs/<stem>)")
    p_run.add_argument(
        "--device-traces", action="store_true", help="also write per-device traces (devices.csv)"
    )
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run two configs and summarize side by side")
    p_cmp.add_argument("--a", required=True, help="first config path")
    p_cmp.add_argument("--b", required=True, help="second config path")
    p_cmp.add_argument("--out-dir", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_rep = sub.add_parser("report", help="render an SVG chart from metrics.csv")
    p_rep.add_argument("--in", dest="in_path", required=True, help="metrics.csv to chart")
    p_rep.add_argument("--out", dest="out_path", required=True, help="output .svg path")
    p_rep.add_argument("--columns", default=None, help="comma-separated metric columns")
    p_rep.set_defaults(func=cmd_report)

    p_val = sub.add_parser("validate-config", help="validate a config file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure with context
        logger.exception("run failed")
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
