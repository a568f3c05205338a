"""Dataset loading, preprocessing, and non-IID distribution across devices.

Pipeline order (fixed): load -> standardize (fit on train) -> PCA (fit on
standardized train) -> train/validation split -> l-cycle label-range
distribution to devices -> per-device min-max scaling and local 80/20 split.

The l-cycle scheme assigns device i the rows whose label falls in the cyclic
range [i mod 10, (i + n_class) mod 10); ranges overlap, so a row may be
handed to several devices. The label modulus is hard-coded at 10.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .vqc import LabeledDataset

logger = logging.getLogger(__name__)

LABEL_MODULUS = 10


@dataclass
class RawDataset:
    """Feature matrix with digit-style labels in [0, 10)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature/label row counts differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= LABEL_MODULUS):
            raise ValueError(f"labels must lie in [0, {LABEL_MODULUS})")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian blob generator description.

    Class centers sit on signed coordinate axes (class c uses axis c mod
    n_features, flipping sign and growing radius as classes wrap), so any two
    centers are at least ``center_scale`` apart regardless of seed.
    """

    n_features: int = 4
    n_classes: int = 10
    center_scale: float = 3.0
    cluster_std: float = 1.0

    def __post_init__(self):
        if self.n_features < 1 or not 1 <= self.n_classes <= LABEL_MODULUS:
            raise ValueError("bad synthetic spec")


def _blob_centers(spec: SyntheticSpec) -> np.ndarray:
    centers = np.zeros((spec.n_classes, spec.n_features))
    for c in range(spec.n_classes):
        axis = c % spec.n_features
        wrap = c // spec.n_features
        sign = 1.0 if wrap % 2 == 0 else -1.0
        centers[c, axis] = sign * spec.center_scale * (1 + wrap // 2)
    return centers


def generate_blobs(spec: SyntheticSpec, n_rows: int, rng: np.random.Generator) -> RawDataset:
    """Round-robin labeled Gaussian blobs; every class appears in the first n_classes rows."""
    centers = _blob_centers(spec)
    labels = np.arange(n_rows) % spec.n_classes
    features = centers[labels] + rng.normal(0.0, spec.cluster_std, (n_rows, spec.n_features))
    return RawDataset(features, labels)


def _read_csv(path: Path) -> RawDataset:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [col.strip() for col in header]
        if "label" not in header:
            raise ValueError(f"{path}: no 'label' column in header")
        label_col = header.index("label")
        feature_cols = [i for i in range(len(header)) if i != label_col]
        features, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                labels.append(int(float(row[label_col])))
                features.append([float(row[i]) for i in feature_cols])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{line_no}: malformed row") from exc
    return RawDataset(np.array(features, dtype=float), np.array(labels, dtype=int))


def load_dataset(
    source: str | Path | SyntheticSpec,
    n_train: int,
    n_test: int,
    seed: int,
) -> tuple[RawDataset, RawDataset]:
    """First-n train/test subsets from a CSV file, or seeded synthetic blobs."""
    if n_train < 1 or n_test < 1:
        raise ValueError("n_train and n_test must be >= 1")
    if isinstance(source, SyntheticSpec):
        rng = np.random.default_rng(seed)
        full = generate_blobs(source, n_train + n_test, rng)
        train = RawDataset(full.features[:n_train], full.labels[:n_train])
        test = RawDataset(full.features[n_train:], full.labels[n_train:])
        return train, test

    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    full = _read_csv(path)
    if len(full) < n_train + n_test:
        logger.warning(
            "%s has %d rows, fewer than requested %d train + %d test; truncating",
            path, len(full), n_train, n_test,
        )
        n_train = min(n_train, len(full))
        n_test = min(n_test, len(full) - n_train)
        if n_test == 0:
            if n_train < 2:
                raise ValueError(f"{path}: not enough rows for a non-empty test set")
            n_train -= 1
            n_test = 1
    train = RawDataset(full.features[:n_train], full.labels[:n_train])
    test = RawDataset(full.features[n_train : n_train + n_test], full.labels[n_train : n_train + n_test])
    return train, test


@dataclass
class Scaler:
    """Per-feature standardizer fitted on the training set (population std)."""

    mean: np.ndarray
    scale: np.ndarray  # std with zero-variance features mapped to 1

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def standardize(train: RawDataset, test: RawDataset) -> tuple[RawDataset, RawDataset, Scaler]:
    """Zero-mean unit-std features using train statistics; constant features become 0."""
    if len(train) == 0:
        raise ValueError("cannot standardize an empty training set")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)  # population std
    scale = np.where(std > 0, std, 1.0)
    scaler = Scaler(mean=mean, scale=scale)
    return (
        RawDataset(scaler.transform(train.features), train.labels),
        RawDataset(scaler.transform(test.features), test.labels),
        scaler,
    )


@dataclass
class PcaModel:
    """Top-k principal axes of the (standardized) training matrix.

    ``components`` rows are orthonormal eigenvectors of the train covariance,
    ordered by non-increasing explained variance, each signed so its
    largest-magnitude entry is positive.
    """

    mean: np.ndarray
    components: np.ndarray  # (k, d)
    explained_variance: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca_fit(train: np.ndarray, k: int) -> PcaModel:
    """Eigendecomposition PCA of the train covariance (sample normalization)."""
    X = np.asarray(train, dtype=float)
    m, d = X.shape
    if not 1 <= k <= min(m, d):
        raise ValueError(f"k={k} must be in [1, min(rows={m}, cols={d})]")
    mean = X.mean(axis=0)
    centered = X - mean
    denom = m - 1 if m > 1 else 1
    cov = centered.T @ centered / denom
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T
    # sign convention keeps golden outputs stable
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return PcaModel(mean=mean, components=components, explained_variance=eigvals[order])


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=float) - model.mean) @ model.components.T


def train_validation_split(
    X: np.ndarray,
    y: np.ndarray,
    alpha: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle split with |train| = round(alpha * m); both sides non-empty."""
    X = np.asarray(X)
    y = np.asarray(y)
    m = X.shape[0]
    if m < 2:
        raise ValueError("need at least 2 rows to split")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    n_train = int(round(alpha * m))
    if n_train < 1 or n_train >= m:
        raise ValueError(f"degenerate split: {n_train}/{m - n_train}")
    perm = np.random.default_rng(seed).permutation(m)
    tr, va = perm[:n_train], perm[n_train:]
    return X[tr], y[tr], X[va], y[va]


@dataclass
class DeviceDataShard:
    """Rows assigned to one device by the l-cycle rule."""

    device_id: int
    features: np.ndarray
    labels: np.ndarray
    label_range: tuple[int, int]  # [start, end) cyclic over LABEL_MODULUS

    def __len__(self) -> int:
        return self.features.shape[0]


def lcycle_labels(device_id: int, n_class: int) -> tuple[int, int]:
    start = device_id % LABEL_MODULUS
    end = (device_id + n_class) % LABEL_MODULUS
    return start, end


def lcycle_distribute(X: np.ndarray, y: np.ndarray, n_devices: int, n_class: int) -> list[DeviceDataShard]:
    """Cyclic label-range selection; rows can land on multiple devices."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=int)
    if not 1 <= n_class <= LABEL_MODULUS:
        raise ValueError(f"n_class must be in [1, {LABEL_MODULUS}]")
    if y.size and (y.min() < 0 or y.max() >= LABEL_MODULUS):
        raise ValueError(f"labels must lie in [0, {LABEL_MODULUS})")
    shards = []
    for device_id in range(n_devices):
        start, end = lcycle_labels(device_id, n_class)
        if end > start:
            mask = (y >= start) & (y < end)
        else:  # wrapped (or full) range
            mask = (y >= start) | (y < end)
        if not mask.any():
            logger.warning("device %d received an empty shard (labels [%d, %d))", device_id, start, end)
        shards.append(DeviceDataShard(device_id, X[mask], y[mask], (start, end)))
    return shards


def device_local_prepare(
    shard: DeviceDataShard,
    seed: int,
    train_ratio: float = 0.8,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Min-max scale the shard's features to [0, 1], then seeded train/test split.

    Scaling uses the shard's own per-feature min/max; constant features map
    to 0. The split keeps at least one row on each side.
    """
    if len(shard) < 2:
        raise ValueError(f"device {shard.device_id}: need >= 2 rows, got {len(shard)}")
    lo = shard.features.min(axis=0)
    hi = shard.features.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (shard.features - lo) / span

    m = len(shard)
    n_train = int(round(train_ratio * m))
    n_train = max(1, min(n_train, m - 1))
    perm = np.random.default_rng(seed).permutation(m)
    tr, te = perm[:n_train], perm[n_train:]
    return (
        LabeledDataset(scaled[tr], shard.labels[tr]),
        LabeledDataset(scaled[te], shard.labels[te]),
    )
