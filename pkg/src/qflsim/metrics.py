"""Per-round metric records and deterministic persistence.

metrics.csv column order is fixed (see CSV_COLUMNS) and covered by a golden
test. Wall-clock time is machine-dependent, so it is kept out of the CSV and
reported in summary.json only; every other value is deterministic for a
given config, which makes a re-run byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__


@dataclass
class RoundMetrics:
    round: int
    avg_device_train_acc: float
    avg_device_test_acc: float
    server_val_loss: float
    server_val_acc: float
    server_test_acc: float
    trainings: int
    comm_events: int
    n_clusters: int
    wall_clock: float
    modeled_t_total: float


CSV_COLUMNS = [
    "round",
    "avg_device_train_acc",
    "avg_device_test_acc",
    "server_val_loss",
    "server_val_acc",
    "server_test_acc",
    "trainings",
    "comm_events",
    "n_clusters",
    "modeled_t_total",
]

TRACE_COLUMNS = [
    "round",
    "device_id",
    "cluster_label",
    "trained",
    "latest_loss",
    "train_score",
    "test_score",
]


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if value is None:
        return ""
    return repr(float(value))


def metrics_csv_text(metrics: list[RoundMetrics]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for m in metrics:
        lines.append(",".join(_cell(getattr(m, col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def traces_csv_text(traces: list[dict]) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for row in traces:
        lines.append(",".join(_cell(row[col]) for col in TRACE_COLUMNS))
    return "\n".join(lines) + "\n"


def summary_dict(metrics: list[RoundMetrics], config_echo: dict) -> dict:
    final = metrics[-1]
    return {
        "code_version": __version__,
        "config": config_echo,
        "seeds": config_echo.get("seeds", {}),
        "rounds_completed": len(metrics),
        "final": {
            "round": final.round,
            "avg_device_train_acc": final.avg_device_train_acc,
            "avg_device_test_acc": final.avg_device_test_acc,
            "server_val_loss": final.server_val_loss,
            "server_val_acc": final.server_val_acc,
            "server_test_acc": final.server_test_acc,
        },
        "totals": {
            "trainings": sum(m.trainings for m in metrics),
            "comm_events": sum(m.comm_events for m in metrics),
            "modeled_t_total": sum(m.modeled_t_total for m in metrics),
            "wall_clock": sum(m.wall_clock for m in metrics),
        },
        "wall_clock_per_round": [m.wall_clock for m in metrics],
    }


def persist_metrics(
    metrics: list[RoundMetrics],
    config_echo: dict,
    out_dir: str | Path,
    device_traces: list[dict] | None = None,
) -> dict[str, Path]:
    """Write metrics.csv and summary.json (plus devices.csv when traces given)."""
    if not metrics:
        raise ValueError("nothing to persist: empty metrics list")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"metrics": out / "metrics.csv", "summary": out / "summary.json"}
    paths["metrics"].write_text(metrics_csv_text(metrics))
    paths["summary"].write_text(
        json.dumps(summary_dict(metrics, config_echo), indent=2, sort_keys=True) + "\n"
    )
    if device_traces is not None:
        paths["traces"] = out / "devices.csv"
        paths["traces"].write_text(traces_csv_text(device_traces))
    return paths
