"""Experiment configuration: JSON schema, validation, and typed access.

A config file is one JSON object. Unknown keys are rejected so typos fail
loudly, and every validation error names the offending field. The validated
raw dict is echoed verbatim into run outputs for provenance.

Top-level keys (* = required):

    protocol*      "qfl" | "mdqfl"
    n_devices*     int >= 1
    rounds*        int >= 1
    n_class*       labels per device for the l-cycle distribution, 1..10
    dataset*       {"source": "synthetic", n_train, n_test, n_features,
                    n_classes, center_scale, cluster_std}
                   or {"source": "csv", "path", n_train, n_test}
    optimizer      {kind, maxiter, learning_rate, rho_begin, rho_end,
                    radius_schedule}
    clustering     {method, k (null = adaptive count), dbscan_eps,
                    dbscan_min_samples, kmeans_init}
    policy         {train_mode, update_mode, test_mode}
    selection      {kind: "loss_argmin" | "uniform_random"}
    comm           {c_device, c_aggregate, alpha}
    seeds          {data, split, clustering, selection, device_split}
    model          {feature_map_reps, ansatz_reps}
    combine_weights {train: [w,w]|null, update: [..]|null, test: [w,w]|null}
    split_alpha    train share of the server-side split (default 0.8)
    pca_components default 4 (also the qubit count)
    workers        parallel device-training tasks (default 1)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .clustering import CLUSTER_METHODS, KMEANS_INITS, UNSUPPORTED_METHODS
from .commodel import CommModelParams
from .data import SyntheticSpec
from .optimizers import OPTIMIZER_KINDS, RADIUS_SCHEDULES, OptimizerConfig

PROTOCOLS = ("qfl", "mdqfl")
SELECTION_KINDS = ("loss_argmin", "uniform_random")


class ConfigError(ValueError):
    """Invalid experiment config; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass(frozen=True)
class Seeds:
    data: int = 0
    split: int = 1
    clustering: int = 2
    selection: int = 3
    device_split: int = 4


@dataclass(frozen=True)
class DatasetConfig:
    source: str
    n_train: int
    n_test: int
    path: str | None = None
    synthetic: SyntheticSpec | None = None


@dataclass(frozen=True)
class ClusteringSettings:
    method: str = "kmeans"
    k: int | None = None  # None -> adaptive ceil(sqrt(n/2))
    dbscan_eps: float = 0.5
    dbscan_min_samples: int = 5
    kmeans_init: str = "kmeanspp"


@dataclass(frozen=True)
class PolicySettings:
    train_mode: int = 0
    update_mode: int = 0
    test_mode: int = 0


@dataclass(frozen=True)
class SelectionSettings:
    kind: str = "loss_argmin"


@dataclass(frozen=True)
class ModelSettings:
    feature_map_reps: int = 1
    ansatz_reps: int = 3


@dataclass(frozen=True)
class CombineWeights:
    train: tuple[float, ...] | None = None
    update: tuple[float, ...] | None = None
    test: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str
    n_devices: int
    rounds: int
    n_class: int
    dataset: DatasetConfig
    optimizer: OptimizerConfig
    clustering: ClusteringSettings
    policy: PolicySettings
    selection: SelectionSettings
    comm: CommModelParams
    seeds: Seeds
    model: ModelSettings
    combine_weights: CombineWeights
    split_alpha: float = 0.8
    pca_components: int = 4
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)


def _require(raw: dict, key: str, kind, parent: str = ""):
    path = f"{parent}.{key}" if parent else key
    if key not in raw:
        raise ConfigError(path, "missing required field")
    value = raw[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(path, "expected an integer")
    if not isinstance(value, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _optional(raw: dict, key: str, kind, default, parent: str = ""):
    if key not in raw or raw[key] is None:
        return default
    return _require(raw, key, kind, parent)


def _reject_unknown(raw: dict, allowed: set[str], parent: str = ""):
    for key in raw:
        if key not in allowed:
            path = f"{parent}.{key}" if parent else key
            raise ConfigError(path, "unknown field")


def _positive_int(raw: dict, key: str, parent: str = "", minimum: int = 1) -> int:
    value = _require(raw, key, int, parent)
    path = f"{parent}.{key}" if parent else key
    if value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return value


def _parse_dataset(raw: dict) -> DatasetConfig:
    _reject_unknown(
        raw,
        {"source", "path", "n_train", "n_test", "n_features", "n_classes", "center_scale", "cluster_std"},
        "dataset",
    )
    source = _require(raw, "source", str, "dataset")
    n_train = _positive_int(raw, "n_train", "dataset")
    n_test = _positive_int(raw, "n_test", "dataset")
    if source == "synthetic":
        try:
            spec = SyntheticSpec(
                n_features=_optional(raw, "n_features", int, 4, "dataset"),
                n_classes=_optional(raw, "n_classes", int, 10, "dataset"),
                center_scale=_optional(raw, "center_scale", float, 3.0, "dataset"),
                cluster_std=_optional(raw, "cluster_std", float, 1.0, "dataset"),
            )
        except ValueError as exc:
            raise ConfigError("dataset", str(exc)) from exc
        return DatasetConfig("synthetic", n_train, n_test, synthetic=spec)
    if source == "csv":
        path = _require(raw, "path", str, "dataset")
        return DatasetConfig("csv", n_train, n_test, path=path)
    raise ConfigError("dataset.source", f"must be 'synthetic' or 'csv', got {source!r}")


def _parse_optimizer(raw: dict) -> OptimizerConfig:
    _reject_unknown(
        raw,
        {"kind", "maxiter", "learning_rate", "rho_begin", "rho_end", "radius_schedule"},
        "optimizer",
    )
    kind = _optional(raw, "kind", str, "cobyla", "optimizer")
    if kind not in OPTIMIZER_KINDS:
        raise ConfigError("optimizer.kind", f"must be one of {OPTIMIZER_KINDS}")
    schedule = _optional(raw, "radius_schedule", str, "adaptive", "optimizer")
    if schedule not in RADIUS_SCHEDULES:
        raise ConfigError("optimizer.radius_schedule", f"must be one of {RADIUS_SCHEDULES}")
    try:
        return OptimizerConfig(
            kind=kind,
            maxiter=_optional(raw, "maxiter", int, 5, "optimizer"),
            learning_rate=_optional(raw, "learning_rate", float, 0.1, "optimizer"),
            rho_begin=_optional(raw, "rho_begin", float, 1.0, "optimizer"),
            rho_end=_optional(raw, "rho_end", float, 1e-6, "optimizer"),
            radius_schedule=schedule,
        )
    except ValueError as exc:
        raise ConfigError("optimizer", str(exc)) from exc


def _parse_clustering(raw: dict) -> ClusteringSettings:
    _reject_unknown(
        raw, {"method", "k", "dbscan_eps", "dbscan_min_samples", "kmeans_init"}, "clustering"
    )
    method = _optional(raw, "method", str, "kmeans", "clustering")
    if method in UNSUPPORTED_METHODS:
        raise ConfigError("clustering.method", f"{method!r} is a declared extension point")
    if method not in CLUSTER_METHODS:
        raise ConfigError("clustering.method", f"must be one of {CLUSTER_METHODS}")
    init = _optional(raw, "kmeans_init", str, "kmeanspp", "clustering")
    if init not in KMEANS_INITS:
        raise ConfigError("clustering.kmeans_init", f"must be one of {KMEANS_INITS}")
    k = _optional(raw, "k", int, None, "clustering")
    if k is not None and k < 1:
        raise ConfigError("clustering.k", "must be >= 1 (or null for the adaptive count)")
    eps = _optional(raw, "dbscan_eps", float, 0.5, "clustering")
    if eps <= 0:
        raise ConfigError("clustering.dbscan_eps", "must be > 0")
    min_samples = _optional(raw, "dbscan_min_samples", int, 5, "clustering")
    if min_samples < 1:
        raise ConfigError("clustering.dbscan_min_samples", "must be >= 1")
    return ClusteringSettings(method, k, eps, min_samples, init)


def _parse_policy(raw: dict) -> PolicySettings:
    _reject_unknown(raw, {"train_mode", "update_mode", "test_mode"}, "policy")
    train_mode = _optional(raw, "train_mode", int, 0, "policy")
    update_mode = _optional(raw, "update_mode", int, 0, "policy")
    test_mode = _optional(raw, "test_mode", int, 0, "policy")
    if train_mode not in (0, 1):
        raise ConfigError("policy.train_mode", "must be 0 or 1")
    if update_mode not in (0, 1, 2):
        raise ConfigError("policy.update_mode", "must be 0, 1 or 2")
    if test_mode not in (0, 1, 2):
        raise ConfigError("policy.test_mode", "must be 0, 1 or 2")
    return PolicySettings(train_mode, update_mode, test_mode)


def _parse_weights(raw: dict) -> CombineWeights:
    _reject_unknown(raw, {"train", "update", "test"}, "combine_weights")
    expected_len = {"train": 2, "update": None, "test": 2}

    def one(key):
        value = raw.get(key)
        if value is None:
            return None
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"combine_weights.{key}", "must be a list of numbers or null")
        want = expected_len[key]
        if want is not None and len(value) != want:
            raise ConfigError(f"combine_weights.{key}", f"must have exactly {want} entries")
        if any(v < 0 for v in value) or sum(value) <= 0:
            raise ConfigError(f"combine_weights.{key}", "weights must be >= 0 with positive sum")
        return tuple(float(v) for v in value)

    return CombineWeights(train=one("train"), update=one("update"), test=one("test"))


TOP_LEVEL_KEYS = {
    "protocol", "n_devices", "rounds", "n_class", "dataset", "optimizer",
    "clustering", "policy", "selection", "comm", "seeds", "model",
    "combine_weights", "split_alpha", "pca_components", "workers",
}


def validate_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict; raises ConfigError naming the bad field."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _reject_unknown(raw, TOP_LEVEL_KEYS)

    protocol = _require(raw, "protocol", str)
    if protocol not in PROTOCOLS:
        raise ConfigError("protocol", f"must be one of {PROTOCOLS}")
    n_devices = _positive_int(raw, "n_devices")
    rounds = _positive_int(raw, "rounds")
    n_class = _positive_int(raw, "n_class")
    if n_class > 10:
        raise ConfigError("n_class", "must be <= 10")

    dataset = _parse_dataset(_require(raw, "dataset", dict))
    optimizer = _parse_optimizer(raw.get("optimizer", {}) or {})
    clustering = _parse_clustering(raw.get("clustering", {}) or {})
    policy = _parse_policy(raw.get("policy", {}) or {})

    selection_raw = raw.get("selection", {}) or {}
    _reject_unknown(selection_raw, {"kind"}, "selection")
    selection_kind = _optional(selection_raw, "kind", str, "loss_argmin", "selection")
    if selection_kind not in SELECTION_KINDS:
        raise ConfigError("selection.kind", f"must be one of {SELECTION_KINDS}")

    comm_raw = raw.get("comm", {}) or {}
    _reject_unknown(comm_raw, {"c_device", "c_aggregate", "alpha"}, "comm")
    try:
        comm = CommModelParams(
            c_device=_optional(comm_raw, "c_device", float, 1.0, "comm"),
            c_aggregate=_optional(comm_raw, "c_aggregate", float, 1.0, "comm"),
            alpha=_optional(comm_raw, "alpha", float, 1.0, "comm"),
        )
    except ValueError as exc:
        raise ConfigError("comm", str(exc)) from exc

    seeds_raw = raw.get("seeds", {}) or {}
    _reject_unknown(seeds_raw, {"data", "split", "clustering", "selection", "device_split"}, "seeds")
    seeds = Seeds(
        data=_optional(seeds_raw, "data", int, 0, "seeds"),
        split=_optional(seeds_raw, "split", int, 1, "seeds"),
        clustering=_optional(seeds_raw, "clustering", int, 2, "seeds"),
        selection=_optional(seeds_raw, "selection", int, 3, "seeds"),
        device_split=_optional(seeds_raw, "device_split", int, 4, "seeds"),
    )

    model_raw = raw.get("model", {}) or {}
    _reject_unknown(model_raw, {"feature_map_reps", "ansatz_reps"}, "model")
    model = ModelSettings(
        feature_map_reps=_positive_int(model_raw, "feature_map_reps", "model")
        if "feature_map_reps" in model_raw else 1,
        ansatz_reps=_positive_int(model_raw, "ansatz_reps", "model")
        if "ansatz_reps" in model_raw else 3,
    )

    weights = _parse_weights(raw.get("combine_weights", {}) or {})
    if weights.update is not None:
        # update-mode mixes 2 models (mode 1) or 3 (mode 2)
        want = {1: 2, 2: 3}.get(policy.update_mode)
        if want is None:
            raise ConfigError("combine_weights.update", "update_mode 0 takes no weights")
        if len(weights.update) != want:
            raise ConfigError(
                "combine_weights.update", f"update_mode {policy.update_mode} needs {want} weights"
            )

    split_alpha = _optional(raw, "split_alpha", float, 0.8)
    if not 0.0 < split_alpha < 1.0:
        raise ConfigError("split_alpha", "must be in (0, 1)")
    pca_components = _optional(raw, "pca_components", int, 4)
    if not 1 <= pca_components <= 12:
        raise ConfigError("pca_components", "must be in [1, 12] (qubit budget)")
    if dataset.synthetic is not None and dataset.synthetic.n_features < pca_components:
        raise ConfigError("dataset.n_features", "must be >= pca_components")
    workers = _optional(raw, "workers", int, 1)
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")

    return ExperimentConfig(
        protocol=protocol,
        n_devices=n_devices,
        rounds=rounds,
        n_class=n_class,
        dataset=dataset,
        optimizer=optimizer,
        clustering=clustering,
        policy=policy,
        selection=SelectionSettings(selection_kind),
        comm=comm,
        seeds=seeds,
        model=model,
        combine_weights=weights,
        split_alpha=split_alpha,
        pca_components=pca_components,
        workers=workers,
        raw=raw,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("<file>", f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return validate_config(raw)
