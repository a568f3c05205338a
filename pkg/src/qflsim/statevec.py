"""Dense statevector simulator for the small gate set used by the classifier circuits.

Qubit-index convention is little-endian throughout the repo: qubit 0 is the
least significant bit of the basis index, so basis state ``|q3 q2 q1 q0>`` has
index ``q0 + 2*q1 + 4*q2 + 8*q3``.

States are complex128 vectors of length ``2**n_qubits``. Operations return new
arrays and never mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin

import numpy as np

from .constants import MAX_QUBITS

StateVector = np.ndarray

GATE_KINDS = ("h", "ry", "rz", "p", "cx")

_SQRT2_INV = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class GateSpec:
    """One gate application: kind, target qubit, optional control / angle."""

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "cx":
            if self.control is None:
                raise ValueError("cx gate requires a control qubit")
            if self.control == self.target:
                raise ValueError("cx control and target must differ")
        elif self.kind in ("ry", "rz", "p"):
            if self.angle is None:
                raise ValueError(f"{self.kind} gate requires an angle")


def h(target: int) -> GateSpec:
    return GateSpec("h", target)


def ry(target: int, angle: float) -> GateSpec:
    return GateSpec("ry", target, angle=angle)


def rz(target: int, angle: float) -> GateSpec:
    return GateSpec("rz", target, angle=angle)


def p(target: int, angle: float) -> GateSpec:
    return GateSpec("p", target, angle=angle)


def cx(control: int, target: int) -> GateSpec:
    return GateSpec("cx", target, control=control)


def single_qubit_matrix(gate: GateSpec) -> np.ndarray:
    """2x2 unitary for a non-controlled gate."""
    if gate.kind == "h":
        return np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
    if gate.kind == "ry":
        half = gate.angle / 2.0
        return np.array([[cos(half), -sin(half)], [sin(half), cos(half)]], dtype=complex)
    if gate.kind == "rz":
        half = gate.angle / 2.0
        return np.array([[np.exp(-1j * half), 0], [0, np.exp(1j * half)]], dtype=complex)
    if gate.kind == "p":
        return np.array([[1, 0], [0, np.exp(1j * gate.angle)]], dtype=complex)
    raise ValueError(f"{gate.kind} is not a single-qubit gate")


def n_qubits_of(state: StateVector) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def init_zero_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits.

    Raises ValueError if n_qubits is outside the supported 1..MAX_QUBITS range.
    """
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    state = np.zeros(1 << n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def _check_indices(gate: GateSpec, n: int):
    if not 0 <= gate.target < n:
        raise IndexError(f"gate target {gate.target} out of range for {n} qubits")
    if gate.control is not None and not 0 <= gate.control < n:
        raise IndexError(f"gate control {gate.control} out of range for {n} qubits")


def apply_gate(state: StateVector, gate: GateSpec) -> StateVector:
    """Apply one gate, returning a new state. Accepts a single state vector
    or a batch shaped (m, 2**n); the gate acts on every row."""
    n = n_qubits_of(state)
    _check_indices(gate, n)
    batched = state.ndim == 2
    work = state if batched else state[np.newaxis, :]

    if gate.kind == "cx":
        dim = work.shape[1]
        idx = np.arange(dim)
        ctrl_on = (idx >> gate.control) & 1 == 1
        source = np.where(ctrl_on, idx ^ (1 << gate.target), idx)
        out = work[:, source]
    else:
        mat = single_qubit_matrix(gate)
        # index = high * 2**(t+1) + bit_t * 2**t + low
        low = 1 << gate.target
        shaped = work.reshape(work.shape[0], -1, 2, low)
        a0 = shaped[:, :, 0, :]
        a1 = shaped[:, :, 1, :]
        out = np.empty_like(shaped)
        out[:, :, 0, :] = mat[0, 0] * a0 + mat[0, 1] * a1
        out[:, :, 1, :] = mat[1, 0] * a0 + mat[1, 1] * a1
        out = out.reshape(work.shape)

    return out if batched else out[0]


def apply_circuit(state: StateVector, gates: list[GateSpec]) -> StateVector:
    """Apply a gate sequence in order. Works on single states and batches."""
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def measurement_probabilities(state: StateVector) -> np.ndarray:
    """Exact basis-state probabilities |a_i|^2 (no sampling)."""
    return np.abs(state) ** 2
