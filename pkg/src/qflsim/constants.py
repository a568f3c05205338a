"""Numeric tolerance constants shared across the simulator.

Kept in one place so tests and runtime checks agree on what "equal" means.
"""

# Statevector norm must stay within this of 1 after any gate sequence.
NORM_ATOL = 1e-10

# Per-gate norm drift allowance.
GATE_NORM_ATOL = 1e-12

# Class probabilities must sum to 1 within this.
PROBA_SUM_ATOL = 1e-9

# Floor applied to predicted probabilities inside the cross-entropy loss.
PROBA_FLOOR = 1e-12

# Orthonormality tolerance for PCA component rows.
PCA_ORTHO_ATOL = 1e-8

# Default step for central finite differences.
FD_STEP = 1e-6

# Lloyd iteration stopping threshold on center movement, and iteration cap.
KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 300

# Hard cap on simulated qubits (dense statevector only).
MAX_QUBITS = 12
