#!/usr/bin/env python3
"""Regenerate tests/data/golden_metrics.csv from the smoke config.

Run after an intentional change to the protocol or the metrics schema, then
review the diff before committing.
"""

from pathlib import Path

from qflsim.config import load_config
from qflsim.federation import run_experiment
from qflsim.metrics import metrics_csv_text

REPO = Path(__file__).resolve().parents[1]
OUT = REPO / "tests" / "data" / "golden_metrics.csv"


def main():
    config = load_config(REPO / "configs" / "smoke_mdqfl.json")
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(metrics_csv_text(run_experiment(config).metrics))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
