#!/usr/bin/env python3
"""Regenerate data/digits.csv from sklearn's bundled 8x8 digit scans.

The CSV is committed; run this only to refresh it. sklearn is needed here
but is not a runtime dependency of the package.
"""

from pathlib import Path

from sklearn.datasets import load_digits

OUT = Path(__file__).resolve().parents[1] / "data" / "digits.csv"


def main():
    digits = load_digits()
    OUT.parent.mkdir(exist_ok=True)
    with open(OUT, "w") as handle:
        cols = [f"px{i}" for i in range(digits.data.shape[1])]
        handle.write(",".join(["label"] + cols) + "\n")
        for row, label in zip(digits.data, digits.target):
            handle.write(",".join([str(int(label))] + [str(int(v)) for v in row]) + "\n")
    print(f"wrote {OUT} ({digits.data.shape[0]} rows)")


if __name__ == "__main__":
    main()
