"""Federated training protocols over variational quantum classifiers.

Two synchronous-round protocols share one runner:

* ``qfl`` baseline — every round, every device with data trains locally
  (warm-started from the broadcast global mean after round 0), the server
  averages all device parameters into the global model and broadcasts it.

* ``mdqfl`` — round 0 trains every device; each later round clusters devices
  by their parameter vectors, picks one representative per cluster, trains
  only the representatives from a policy-chosen start vector, pushes
  policy-chosen updates to their cluster peers, and recomputes the global
  and cluster-average models.

Determinism contract: all cross-device reads use the round-start snapshot,
device trainings are independent (safe to run on worker threads), and every
reduction runs in ascending device-id / cluster-label order, so results are
identical for any worker count.

Adaptive model choices (policy modes):
  train_mode  0 -> global mean; 1 -> mean(cluster average, global mean)
  update_mode 0 -> representative's model; 1 -> mean(rep, own old);
              2 -> mean(rep, own old, global mean)
  test_mode   0 -> global mean; 1 -> mean(global, cluster avg); 2 -> cluster avg
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import data as dp
from . import vqc
from .clustering import ClusterConfig, cluster_count, cluster_devices
from .config import ExperimentConfig
from .metrics import RoundMetrics
from .optimizers import minimize

logger = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    """A module error re-raised with round/device context."""


@dataclass
class PersonalizationPolicy:
    """Mode triple selecting the train / update / test combination rules."""

    train_mode: int = 0
    update_mode: int = 0
    test_mode: int = 0

    def __post_init__(self):
        if self.train_mode not in (0, 1):
            raise ValueError("train_mode must be 0 or 1")
        if self.update_mode not in (0, 1, 2):
            raise ValueError("update_mode must be 0, 1 or 2")
        if self.test_mode not in (0, 1, 2):
            raise ValueError("test_mode must be 0, 1 or 2")


@dataclass
class SelectionRule:
    kind: str = "loss_argmin"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("loss_argmin", "uniform_random"):
            raise ValueError(f"unknown selection kind {self.kind!r}")


@dataclass
class DeviceState:
    """One simulated participant: local splits, current model, latest results."""

    id: int
    train_data: vqc.EncodedDataset | None
    test_data: vqc.EncodedDataset | None
    params: np.ndarray
    cluster_label: int = -1
    latest_loss: float | None = None
    train_score: float = float("nan")
    test_score: float = float("nan")
    train_wall_time: float = 0.0

    @property
    def has_data(self) -> bool:
        return self.train_data is not None and len(self.train_data) > 0


@dataclass
class ServerState:
    validation: vqc.EncodedDataset
    test: vqc.EncodedDataset
    theta_g: np.ndarray | None = None
    theta_c: np.ndarray | None = None
    theta_s: np.ndarray | None = None
    list_c: list[np.ndarray] = field(default_factory=list)


def combine(models: list[np.ndarray], weights: tuple[float, ...] | None = None) -> np.ndarray:
    """Elementwise (weighted) mean of equal-length parameter vectors."""
    if len(models) == 0:
        raise ValueError("combine requires at least one model")
    mat = np.asarray(models, dtype=float)
    if mat.ndim != 2:
        raise ValueError("models must share one length")
    if weights is None:
        return mat.mean(axis=0)
    w = np.asarray(weights, dtype=float)
    if w.shape != (mat.shape[0],):
        raise ValueError(f"need {mat.shape[0]} weights, got {w.shape}")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must have positive sum")
    return (w[:, None] * mat).sum(axis=0) / total


def select_representative(
    group: list[DeviceState],
    rule: SelectionRule,
    rng: np.random.Generator | None = None,
) -> int:
    """Device id chosen from a cluster: lowest latest loss, or a seeded uniform draw."""
    if not group:
        raise ValueError("cannot select from an empty group")
    if rule.kind == "loss_argmin":
        for device in group:
            if device.latest_loss is None:
                raise ValueError(f"device {device.id} has no recorded loss for loss_argmin")
        return min(group, key=lambda d: (d.latest_loss, d.id)).id
    if rng is None:
        rng = np.random.default_rng(rule.seed)
    return group[int(rng.integers(len(group)))].id


def train_model_for_selected(
    policy: PersonalizationPolicy,
    theta_g: np.ndarray,
    theta_c: np.ndarray | None,
    weights: tuple[float, ...] | None = None,
) -> np.ndarray:
    """Start vector for a representative's local training."""
    if theta_g is None:
        raise ValueError("training start requires the global model")
    if policy.train_mode == 0:
        return theta_g.copy()
    if theta_c is None:
        logger.warning("no cluster-average model yet; train start falls back to the global model")
        return theta_g.copy()
    return combine([theta_c, theta_g], weights)


def update_cluster_members(
    policy: PersonalizationPolicy,
    group: list[DeviceState],
    theta_s: np.ndarray,
    theta_g: np.ndarray,
    weights: tuple[float, ...] | None = None,
) -> None:
    """Absorb the representative's new model into every device of the group.

    Applied sequentially in the caller's order; a device's "old model" is its
    params at update time, so the freshly trained representative keeps its
    own model under modes 0 and 1.
    """
    for device in group:
        if policy.update_mode == 0:
            device.params = theta_s.copy()
        elif policy.update_mode == 1:
            device.params = combine([theta_s, device.params], weights)
        else:
            device.params = combine([theta_s, device.params, theta_g], weights)


def aggregate(devices: list[DeviceState], list_c: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """(global mean over devices with data, mean of this round's cluster models)."""
    participants = [d for d in sorted(devices, key=lambda d: d.id) if d.has_data]
    if not participants:
        raise ValueError("no devices to aggregate")
    if not list_c:
        raise ValueError("aggregate requires at least one cluster model")
    theta_g = combine([d.params for d in participants])
    theta_c = combine(list(list_c))
    return theta_g, theta_c


def server_test_model(
    policy: PersonalizationPolicy,
    theta_g: np.ndarray,
    theta_c: np.ndarray | None,
    weights: tuple[float, ...] | None = None,
) -> np.ndarray:
    """Model the server evaluates, per the generalization mode."""
    if policy.test_mode == 0:
        return theta_g.copy()
    if theta_c is None:
        logger.warning("no cluster-average model yet; test model falls back to the global model")
        return theta_g.copy()
    if policy.test_mode == 1:
        return combine([theta_g, theta_c], weights)
    return theta_c.copy()


def _minmax_dataset(X: np.ndarray, y: np.ndarray) -> vqc.LabeledDataset:
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return vqc.LabeledDataset((X - lo) / span, y)


@dataclass
class ExperimentResult:
    metrics: list[RoundMetrics]
    device_traces: list[dict]


class FederationRunner:
    """Builds the federation from a config and executes protocol rounds."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.feature_map = vqc.FeatureMapConfig(config.pca_components, config.model.feature_map_reps)
        self.ansatz = vqc.AnsatzConfig(config.pca_components, config.model.ansatz_reps)
        self.policy = PersonalizationPolicy(
            config.policy.train_mode, config.policy.update_mode, config.policy.test_mode
        )
        self.selection = SelectionRule(config.selection.kind, config.seeds.selection)
        self.initial_params = vqc.default_initial_params(self.ansatz)
        self._setup_data()

    def _setup_data(self):
        cfg = self.config
        source = cfg.dataset.synthetic if cfg.dataset.source == "synthetic" else cfg.dataset.path
        train_raw, test_raw = dp.load_dataset(source, cfg.dataset.n_train, cfg.dataset.n_test, cfg.seeds.data)
        train_std, test_std, _ = dp.standardize(train_raw, test_raw)
        pca = dp.pca_fit(train_std.features, cfg.pca_components)
        train_proj = dp.pca_transform(pca, train_std.features)
        test_proj = dp.pca_transform(pca, test_std.features)

        X_pool, y_pool, X_val, y_val = dp.train_validation_split(
            train_proj, train_std.labels, cfg.split_alpha, cfg.seeds.split
        )
        self.n_classes = int(max(y_pool.max(), y_val.max(), test_std.labels.max())) + 1

        shards = dp.lcycle_distribute(X_pool, y_pool, cfg.n_devices, cfg.n_class)
        self.devices: list[DeviceState] = []
        for shard in shards:
            if len(shard) < 2:
                logger.warning(
                    "device %d shard has %d rows; it will not train or aggregate",
                    shard.device_id, len(shard),
                )
                self.devices.append(
                    DeviceState(shard.device_id, None, None, self.initial_params.copy())
                )
                continue
            local_train, local_test = dp.device_local_prepare(
                shard, seed=cfg.seeds.device_split + shard.device_id
            )
            self.devices.append(
                DeviceState(
                    shard.device_id,
                    vqc.EncodedDataset.from_dataset(local_train, self.feature_map),
                    vqc.EncodedDataset.from_dataset(local_test, self.feature_map),
                    self.initial_params.copy(),
                )
            )
        if not any(d.has_data for d in self.devices):
            raise ProtocolError("no device received a trainable shard; check n_class and dataset size")

        self.server = ServerState(
            validation=vqc.EncodedDataset.from_dataset(
                _minmax_dataset(X_val, y_val), self.feature_map
            ),
            test=vqc.EncodedDataset.from_dataset(
                _minmax_dataset(test_proj, test_std.labels), self.feature_map
            ),
        )

    # -- device training -----------------------------------------------------

    def trainable_devices(self) -> list[DeviceState]:
        return [d for d in self.devices if d.has_data]

    def _train_one(self, device: DeviceState, start: np.ndarray, round_index: int):
        objective = lambda x: vqc.loss(x, device.train_data, self.n_classes, ansatz=self.ansatz)  # noqa: E731
        gradient_fn = None
        if self.config.optimizer.kind == "aqgd":
            gradient_fn = lambda x: vqc.loss_gradient(  # noqa: E731
                x, device.train_data, self.n_classes, ansatz=self.ansatz
            )
        begin = time.perf_counter()
        try:
            result = minimize(objective, start, self.config.optimizer, gradient_fn=gradient_fn)
        except Exception as exc:
            raise ProtocolError(f"round {round_index}, device {device.id}: {exc}") from exc
        return device.id, result, time.perf_counter() - begin

    def _train_devices(self, jobs: list[tuple[DeviceState, np.ndarray]], round_index: int) -> int:
        """Run the (device, start-vector) jobs, apply results in id order."""
        if not jobs:
            return 0
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                outcomes = list(
                    pool.map(lambda job: self._train_one(job[0], job[1], round_index), jobs)
                )
        else:
            outcomes = [self._train_one(device, start, round_index) for device, start in jobs]
        by_id = {d.id: d for d in self.devices}
        for device_id, result, wall in sorted(outcomes, key=lambda item: item[0]):
            device = by_id[device_id]
            device.params = result.best_params.copy()
            device.latest_loss = result.best_value
            device.train_wall_time = wall
        return len(jobs)

    def initial_round(self) -> int:
        """Round-0 contract: every device with data trains once from the shared start."""
        jobs = [(d, self.initial_params.copy()) for d in self.trainable_devices()]
        return self._train_devices(jobs, round_index=0)

    # -- evaluation ------------------------------------------------------------

    def _rescore_devices(self):
        for device in self.trainable_devices():
            device.train_score = vqc.score(device.params, device.train_data, self.n_classes, ansatz=self.ansatz)
            device.test_score = vqc.score(device.params, device.test_data, self.n_classes, ansatz=self.ansatz)

    def _evaluate_round(
        self, round_index: int, trainings: int, comm_events: int, n_clusters: int,
        wall_clock: float, modeled_t_total: float,
    ) -> RoundMetrics:
        self._rescore_devices()
        trainable = self.trainable_devices()
        theta_s = self.server.theta_s
        val_proba = vqc.proba_from_encoded(theta_s, self.server.validation, self.n_classes, self.ansatz)
        val_labels = self.server.validation.labels
        test_proba = vqc.proba_from_encoded(theta_s, self.server.test, self.n_classes, self.ansatz)
        return RoundMetrics(
            round=round_index,
            avg_device_train_acc=float(np.mean([d.train_score for d in trainable])),
            avg_device_test_acc=float(np.mean([d.test_score for d in trainable])),
            server_val_loss=vqc.cross_entropy(val_proba, val_labels),
            server_val_acc=float(np.mean(np.argmax(val_proba, axis=1) == val_labels)),
            server_test_acc=float(np.mean(np.argmax(test_proba, axis=1) == self.server.test.labels)),
            trainings=trainings,
            comm_events=comm_events,
            n_clusters=n_clusters,
            wall_clock=wall_clock,
            modeled_t_total=modeled_t_total,
        )

    def _trace_round(self, round_index: int, trained_ids: set[int], traces: list[dict]):
        for device in self.devices:
            traces.append(
                {
                    "round": round_index,
                    "device_id": device.id,
                    "cluster_label": device.cluster_label,
                    "trained": device.id in trained_ids,
                    "latest_loss": device.latest_loss,
                    "train_score": device.train_score,
                    "test_score": device.test_score,
                }
            )

    # -- protocols --------------------------------------------------------------

    def run(self) -> ExperimentResult:
        if self.config.protocol == "qfl":
            return self._run_qfl()
        return self._run_mdqfl()

    def _run_qfl(self) -> ExperimentResult:
        cfg = self.config
        comm = cfg.comm
        metrics: list[RoundMetrics] = []
        traces: list[dict] = []
        for round_index in range(cfg.rounds):
            begin = time.perf_counter()
            trainable = self.trainable_devices()
            start = self.initial_params if round_index == 0 else self.server.theta_g
            jobs = [(d, start.copy()) for d in trainable]
            trainings = self._train_devices(jobs, round_index)
            self.server.theta_g = combine([d.params for d in trainable])
            for device in self.devices:  # broadcast
                device.params = self.server.theta_g.copy()
            self.server.theta_s = self.server.theta_g.copy()
            n = len(trainable)
            modeled_total = comm.alpha * n + n * comm.c_device
            metrics.append(
                self._evaluate_round(
                    round_index,
                    trainings=trainings,
                    comm_events=n,
                    n_clusters=0,
                    wall_clock=time.perf_counter() - begin,
                    modeled_t_total=modeled_total,
                )
            )
            self._trace_round(round_index, {d.id for d in trainable}, traces)
        return ExperimentResult(metrics, traces)

    def _cluster_config(self, round_index: int, n_trainable: int) -> ClusterConfig:
        cfg = self.config
        k = cfg.clustering.k if cfg.clustering.k is not None else cluster_count(n_trainable)
        return ClusterConfig(
            method=cfg.clustering.method,
            k=k,
            dbscan_eps=cfg.clustering.dbscan_eps,
            dbscan_min_samples=cfg.clustering.dbscan_min_samples,
            seed=cfg.seeds.clustering + round_index,
            kmeans_init=cfg.clustering.kmeans_init,
        )

    def _run_mdqfl(self) -> ExperimentResult:
        cfg = self.config
        comm = cfg.comm
        weights = cfg.combine_weights
        metrics: list[RoundMetrics] = []
        traces: list[dict] = []

        for round_index in range(cfg.rounds):
            begin = time.perf_counter()
            trainable = self.trainable_devices()

            if round_index == 0:
                trainings = self.initial_round()
                self.server.list_c = []
                self.server.theta_g = combine([d.params for d in trainable])
                self.server.theta_c = None
                n_clusters = 0
                n = trainings
                modeled_total = comm.alpha * n + n * comm.c_device + comm.c_aggregate
                comm_events = n + 1
                trained_ids = {d.id for d in trainable}
            else:
                theta_g_prev, theta_c_prev = self.server.theta_g, self.server.theta_c
                rows = np.array([d.params for d in trainable])
                assignment = cluster_devices(rows, self._cluster_config(round_index, len(trainable)))
                for device, label in zip(trainable, assignment.labels):
                    device.cluster_label = int(label)
                groups = [[trainable[i] for i in group] for group in assignment.groups]

                rng_select = np.random.default_rng([cfg.seeds.selection, round_index])
                start = train_model_for_selected(
                    self.policy, theta_g_prev, theta_c_prev, weights.train
                )
                reps: list[DeviceState] = []
                by_id = {d.id: d for d in self.devices}
                for group in groups:
                    rep_id = select_representative(group, self.selection, rng_select)
                    reps.append(by_id[rep_id])
                trainings = self._train_devices(
                    [(rep, start.copy()) for rep in reps], round_index
                )
                self.server.list_c = []
                for group, rep in zip(groups, reps):
                    theta_s_group = rep.params.copy()
                    self.server.list_c.append(theta_s_group)
                    update_cluster_members(
                        self.policy, group, theta_s_group, theta_g_prev, weights.update
                    )
                self.server.theta_g, self.server.theta_c = aggregate(self.devices, self.server.list_c)
                n_clusters = len(groups)
                comm_events = n_clusters + 1
                modeled_total = comm.alpha * n_clusters + n_clusters * comm.c_device + comm.c_aggregate
                trained_ids = {rep.id for rep in reps}

            self.server.theta_s = server_test_model(
                self.policy, self.server.theta_g, self.server.theta_c, weights.test
            )
            metrics.append(
                self._evaluate_round(
                    round_index,
                    trainings=trainings,
                    comm_events=comm_events,
                    n_clusters=n_clusters,
                    wall_clock=time.perf_counter() - begin,
                    modeled_t_total=modeled_total,
                )
            )
            self._trace_round(round_index, trained_ids, traces)
        return ExperimentResult(metrics, traces)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Build the federation for ``config`` and run all rounds."""
    return FederationRunner(config).run()


def run_mdqfl(config: ExperimentConfig) -> list[RoundMetrics]:
    if config.protocol != "mdqfl":
        raise ValueError("config.protocol must be 'mdqfl'")
    return run_experiment(config).metrics


def run_qfl_baseline(config: ExperimentConfig) -> list[RoundMetrics]:
    if config.protocol != "qfl":
        raise ValueError("config.protocol must be 'qfl'")
    return run_experiment(config).metrics
