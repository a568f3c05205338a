"""Variational quantum classifier: encoding circuit, trainable ansatz, and scoring.

The model runs a data-dependent feature map followed by a parameterized
rotation ansatz on |0...0>, reads out exact basis probabilities, and folds
them into class probabilities by basis-index modulo. Training minimizes the
mean categorical cross-entropy of the folded probabilities.

Class fold: basis state i contributes to class ``i % n_classes``. The fold is
total and uniform for any n_classes <= 2**n_qubits; it is the one
interpretation rule used everywhere in this repo.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

from . import statevec as sv
from .constants import PROBA_FLOOR


@dataclass(frozen=True)
class FeatureMapConfig:
    """Second-order Pauli-Z evolution encoder with linear pairing."""

    n_qubits: int = 4
    reps: int = 1

    def __post_init__(self):
        if self.n_qubits < 1 or self.reps < 1:
            raise ValueError("n_qubits and reps must be >= 1")


@dataclass(frozen=True)
class AnsatzConfig:
    """RY-rotation layers interleaved with linear CX chains.

    ``reps + 1`` rotation layers give ``n_qubits * (reps + 1)`` parameters,
    consumed in layer-major, qubit-minor order.
    """

    n_qubits: int = 4
    reps: int = 3
    entanglement: str = "linear"

    def __post_init__(self):
        if self.n_qubits < 1 or self.reps < 1:
            raise ValueError("n_qubits and reps must be >= 1")
        if self.entanglement != "linear":
            raise ValueError("only linear entanglement is supported")

    @property
    def parameter_count(self) -> int:
        return self.n_qubits * (self.reps + 1)


DEFAULT_FEATURE_MAP = FeatureMapConfig()
DEFAULT_ANSATZ = AnsatzConfig()


def default_initial_params(ansatz: AnsatzConfig = DEFAULT_ANSATZ) -> np.ndarray:
    """Shared training start: every angle at 0.5."""
    return np.full(ansatz.parameter_count, 0.5)


@dataclass
class LabeledDataset:
    """Feature rows with integer labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"row mismatch: {self.features.shape[0]} feature rows, {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.features.shape[0]


def build_feature_map_circuit(x: np.ndarray, cfg: FeatureMapConfig = DEFAULT_FEATURE_MAP) -> list[sv.GateSpec]:
    """Gate list encoding feature vector ``x``.

    Per rep: H on every qubit, a phase P(2*x_i) on qubit i, then for each
    adjacent pair (i, i+1): CX(i,i+1), P(2*(pi-x_i)*(pi-x_j)) on qubit i+1,
    CX(i,i+1).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.n_qubits,):
        raise ValueError(f"expected {cfg.n_qubits} features, got shape {x.shape}")
    gates: list[sv.GateSpec] = []
    for _ in range(cfg.reps):
        for q in range(cfg.n_qubits):
            gates.append(sv.h(q))
        for q in range(cfg.n_qubits):
            gates.append(sv.p(q, 2.0 * x[q]))
        for q in range(cfg.n_qubits - 1):
            gates.append(sv.cx(q, q + 1))
            gates.append(sv.p(q + 1, 2.0 * (pi - x[q]) * (pi - x[q + 1])))
            gates.append(sv.cx(q, q + 1))
    return gates


def build_ansatz_circuit(params: np.ndarray, cfg: AnsatzConfig = DEFAULT_ANSATZ) -> list[sv.GateSpec]:
    """Gate list for the trainable ansatz; ``params`` length must match cfg."""
    params = np.asarray(params, dtype=float)
    if params.shape != (cfg.parameter_count,):
        raise ValueError(
            f"expected {cfg.parameter_count} parameters, got shape {params.shape}"
        )
    gates: list[sv.GateSpec] = []
    for layer in range(cfg.reps + 1):
        for q in range(cfg.n_qubits):
            gates.append(sv.ry(q, params[layer * cfg.n_qubits + q]))
        if layer < cfg.reps:
            for q in range(cfg.n_qubits - 1):
                gates.append(sv.cx(q, q + 1))
    return gates


def encode_features(x: np.ndarray, cfg: FeatureMapConfig = DEFAULT_FEATURE_MAP) -> np.ndarray:
    """State after the feature map on |0...0>."""
    return sv.apply_circuit(sv.init_zero_state(cfg.n_qubits), build_feature_map_circuit(x, cfg))


@dataclass
class EncodedDataset:
    """LabeledDataset plus its cached post-feature-map states (m, 2**n).

    Encoding depends only on the features, so devices encode once and reuse
    the states across every optimizer evaluation.
    """

    labels: np.ndarray
    states: np.ndarray
    feature_map: FeatureMapConfig = field(default=DEFAULT_FEATURE_MAP)

    @classmethod
    def from_dataset(cls, data: LabeledDataset, cfg: FeatureMapConfig = DEFAULT_FEATURE_MAP) -> "EncodedDataset":
        states = np.stack([encode_features(row, cfg) for row in data.features])
        return cls(labels=data.labels.copy(), states=states, feature_map=cfg)

    def __len__(self) -> int:
        return self.states.shape[0]


def _fold_to_classes(basis_probs: np.ndarray, n_classes: int) -> np.ndarray:
    """Fold basis probabilities (..., 2**n) into (..., n_classes) by index modulo."""
    dim = basis_probs.shape[-1]
    if n_classes > dim:
        raise ValueError(f"n_classes={n_classes} exceeds basis size {dim}")
    class_of = np.arange(dim) % n_classes
    out = np.zeros(basis_probs.shape[:-1] + (n_classes,))
    for c in range(n_classes):
        out[..., c] = basis_probs[..., class_of == c].sum(axis=-1)
    return out


def proba_from_encoded(
    params: np.ndarray,
    encoded: EncodedDataset,
    n_classes: int,
    ansatz: AnsatzConfig = DEFAULT_ANSATZ,
) -> np.ndarray:
    """Class-probability matrix (m, n_classes) from cached encoded states."""
    states = sv.apply_circuit(encoded.states, build_ansatz_circuit(params, ansatz))
    return _fold_to_classes(np.abs(states) ** 2, n_classes)


def predict_proba(
    params: np.ndarray,
    x: np.ndarray,
    n_classes: int,
    feature_map: FeatureMapConfig = DEFAULT_FEATURE_MAP,
    ansatz: AnsatzConfig = DEFAULT_ANSATZ,
) -> np.ndarray:
    """Class probabilities for a single feature vector; sums to 1."""
    state = encode_features(x, feature_map)
    state = sv.apply_circuit(state, build_ansatz_circuit(params, ansatz))
    return _fold_to_classes(sv.measurement_probabilities(state), n_classes)


def cross_entropy(proba: np.ndarray, labels: np.ndarray) -> float:
    """Mean -log P(label) over rows, with probabilities floored at PROBA_FLOOR."""
    picked = proba[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROBA_FLOOR))))


def loss(
    params: np.ndarray,
    data: LabeledDataset | EncodedDataset,
    n_classes: int,
    feature_map: FeatureMapConfig = DEFAULT_FEATURE_MAP,
    ansatz: AnsatzConfig = DEFAULT_ANSATZ,
) -> float:
    """Mean categorical cross-entropy of the classifier on ``data``."""
    if len(data) == 0:
        raise ValueError("loss requires a non-empty dataset")
    if isinstance(data, LabeledDataset):
        data = EncodedDataset.from_dataset(data, feature_map)
    proba = proba_from_encoded(params, data, n_classes, ansatz)
    return cross_entropy(proba, data.labels)


def score(
    params: np.ndarray,
    data: LabeledDataset | EncodedDataset,
    n_classes: int,
    feature_map: FeatureMapConfig = DEFAULT_FEATURE_MAP,
    ansatz: AnsatzConfig = DEFAULT_ANSATZ,
) -> float:
    """Accuracy of argmax-class predictions; ties go to the smaller class index."""
    if len(data) == 0:
        raise ValueError("score requires a non-empty dataset")
    if isinstance(data, LabeledDataset):
        data = EncodedDataset.from_dataset(data, feature_map)
    proba = proba_from_encoded(params, data, n_classes, ansatz)
    return float(np.mean(np.argmax(proba, axis=1) == data.labels))


def loss_gradient(
    params: np.ndarray,
    data: LabeledDataset | EncodedDataset,
    n_classes: int,
    feature_map: FeatureMapConfig = DEFAULT_FEATURE_MAP,
    ansatz: AnsatzConfig = DEFAULT_ANSATZ,
) -> np.ndarray:
    """Exact loss gradient via the parameter-shift rule.

    Each class probability is a single-frequency trigonometric function of
    each RY angle, so dP/dtheta_i = [P(theta_i + pi/2) - P(theta_i - pi/2)] / 2
    exactly; the log is then differentiated by chain rule. Samples whose
    picked probability sits at the clamp floor contribute zero gradient.
    """
    if isinstance(data, LabeledDataset):
        data = EncodedDataset.from_dataset(data, feature_map)
    params = np.asarray(params, dtype=float)
    rows = np.arange(len(data))
    proba = proba_from_encoded(params, data, n_classes, ansatz)[rows, data.labels]
    grad = np.zeros_like(params)
    for i in range(params.size):
        shifted = params.copy()
        shifted[i] = params[i] + pi / 2
        plus = proba_from_encoded(shifted, data, n_classes, ansatz)[rows, data.labels]
        shifted[i] = params[i] - pi / 2
        minus = proba_from_encoded(shifted, data, n_classes, ansatz)[rows, data.labels]
        dproba = (plus - minus) / 2.0
        live = proba > PROBA_FLOOR
        grad[i] = -np.mean(np.where(live, dproba / np.maximum(proba, PROBA_FLOOR), 0.0))
    return grad
