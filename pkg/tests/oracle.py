"""Independent dense-matrix oracle for circuit tests.

Builds the full 2^n x 2^n unitary of a gate list via explicit Kronecker
products and applies it with a plain matrix-vector product. Deliberately
shares no code with qflsim.statevec beyond the 2x2 gate definitions' math,
which is restated here from the textbook matrices.
"""

from __future__ import annotations

import numpy as np

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def dense_1q(kind: str, angle: float | None = None) -> np.ndarray:
    if kind == "h":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if kind == "ry":
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "rz":
        return np.array([[np.exp(-1j * angle / 2), 0], [0, np.exp(1j * angle / 2)]], dtype=complex)
    if kind == "p":
        return np.array([[1, 0], [0, np.exp(1j * angle)]], dtype=complex)
    raise ValueError(kind)


def embed(mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Little-endian embedding: identity on all qubits except ``qubit``."""
    left = np.eye(1 << (n - 1 - qubit), dtype=complex)
    right = np.eye(1 << qubit, dtype=complex)
    return np.kron(np.kron(left, mat), right)


def gate_unitary(gate, n: int) -> np.ndarray:
    if gate.kind == "cx":
        return embed(_P0, gate.control, n) + embed(_P1, gate.control, n) @ embed(_X, gate.target, n)
    return embed(dense_1q(gate.kind, gate.angle), gate.target, n)


def circuit_unitary(gates, n: int) -> np.ndarray:
    u = np.eye(1 << n, dtype=complex)
    for gate in gates:
        u = gate_unitary(gate, n) @ u
    return u


def apply_with_oracle(state: np.ndarray, gates, n: int) -> np.ndarray:
    return circuit_unitary(gates, n) @ state


def random_gates(rng: np.random.Generator, n: int, length: int):
    """Random gate list over the full supported gate set."""
    from qflsim import statevec as sv

    gates = []
    for _ in range(length):
        kind = rng.choice(["h", "ry", "rz", "p", "cx"])
        if kind == "cx" and n < 2:
            kind = "h"
        if kind == "cx":
            control, target = rng.choice(n, size=2, replace=False)
            gates.append(sv.cx(int(control), int(target)))
        elif kind == "h":
            gates.append(sv.h(int(rng.integers(n))))
        else:
            angle = float(rng.uniform(-2 * np.pi, 2 * np.pi))
            gates.append(sv.GateSpec(kind, int(rng.integers(n)), angle=angle))
    return gates


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    vec = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return vec / np.linalg.norm(vec)
