"""Scalar minimizers used for local device training.

Four kinds:

* ``cobyla`` — derivative-free linear-approximation trust-region method: a
  simplex of n+1 points fits a linear model, the step moves the trust radius
  along the model's descent direction, and the radius shrinks on failure
  (``adaptive``) or follows the forced ``inverse_t`` schedule
  ``delta_t = rho_begin / t``.
* ``gd`` — gradient descent with central finite differences.
* ``adam`` — ADAM over central finite differences (beta1=0.9, beta2=0.999,
  eps=1e-8).
* ``aqgd`` — gradient descent with parameter-shift gradients, for objectives
  that are single-frequency trigonometric in each coordinate.

All four accept an optional ``gradient_fn`` that overrides the built-in
gradient estimate (ignored by cobyla). Every run is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .constants import FD_STEP

OPTIMIZER_KINDS = ("cobyla", "gd", "adam", "aqgd")
RADIUS_SCHEDULES = ("adaptive", "inverse_t")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ObjectiveError(RuntimeError):
    """Objective returned a non-finite value; ``point`` is where it happened."""

    def __init__(self, point: np.ndarray, value: float):
        super().__init__(f"objective returned non-finite value {value!r} at {point!r}")
        self.point = point
        self.value = value


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "cobyla"
    maxiter: int = 100
    learning_rate: float = 0.1
    rho_begin: float = 1.0
    rho_end: float = 1e-6
    radius_schedule: str = "adaptive"

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not self.rho_end < self.rho_begin:
            raise ValueError("rho_end must be smaller than rho_begin")
        if self.radius_schedule not in RADIUS_SCHEDULES:
            raise ValueError(f"unknown radius schedule {self.radius_schedule!r}")


@dataclass
class OptRunResult:
    """Outcome of one minimize() run.

    ``value_history[t]`` is the objective value recorded at iteration t+1:
    the current-best point for cobyla, the post-step iterate for gradient
    methods. ``radius_history`` (cobyla only) pairs with it: entry t is the
    trust radius used by iteration t+1.
    """

    best_params: np.ndarray
    best_value: float
    value_history: list[float]
    radius_history: list[float] | None
    evaluations: int


class _CountedObjective:
    def __init__(self, objective):
        self._objective = objective
        self.calls = 0

    def __call__(self, x: np.ndarray) -> float:
        self.calls += 1
        value = float(self._objective(x))
        if not np.isfinite(value):
            raise ObjectiveError(np.asarray(x, dtype=float).copy(), value)
        return value


def gradient(objective, x: np.ndarray, method: str = "central_fd", h: float = FD_STEP) -> np.ndarray:
    """Gradient estimate at ``x``.

    ``central_fd`` uses symmetric differences with step ``h``;
    ``parameter_shift`` evaluates at +-pi/2 shifts with scale 1/2, which is
    exact when the objective is single-frequency trigonometric in each
    coordinate.
    """
    x = np.asarray(x, dtype=float)
    counted = _CountedObjective(objective)
    grad = np.empty_like(x)
    if method == "central_fd":
        shift, scale = h, 1.0 / (2.0 * h)
    elif method == "parameter_shift":
        shift, scale = pi / 2.0, 0.5
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    for i in range(x.size):
        probe = x.copy()
        probe[i] = x[i] + shift
        up = counted(probe)
        probe[i] = x[i] - shift
        down = counted(probe)
        grad[i] = (up - down) * scale
    return grad


def _minimize_cobyla(counted, x0: np.ndarray, cfg: OptimizerConfig) -> OptRunResult:
    n = x0.size
    points = [x0.copy()] + [x0 + cfg.rho_begin * np.eye(n)[i] for i in range(n)]
    values = [counted(point) for point in points]

    best_idx = int(np.argmin(values))
    best_point, best_value = points[best_idx].copy(), values[best_idx]
    delta = cfg.rho_begin
    value_history: list[float] = []
    radius_history: list[float] = []

    for t in range(1, cfg.maxiter + 1):
        if cfg.radius_schedule == "inverse_t":
            delta = cfg.rho_begin / t
        radius_history.append(delta)

        diffs = np.array([point - best_point for point in points])
        gaps = np.array([value - best_value for value in values])
        g, *_ = np.linalg.lstsq(diffs, gaps, rcond=None)
        norm = np.linalg.norm(g)
        if norm > 1e-14:
            candidate = best_point - delta * g / norm
        else:
            # degenerate model: deterministic coordinate probe
            candidate = best_point + delta * np.eye(n)[(t - 1) % n]
        f_cand = counted(candidate)

        worst_idx = int(np.argmax(values))
        if f_cand < values[worst_idx]:
            points[worst_idx] = candidate
            values[worst_idx] = f_cand
        if f_cand < best_value:
            best_point, best_value = candidate.copy(), f_cand
        elif cfg.radius_schedule == "adaptive":
            delta = max(delta / 2.0, cfg.rho_end)
        value_history.append(best_value)

    return OptRunResult(best_point, best_value, value_history, radius_history, counted.calls)


def _minimize_gradient(counted, x0: np.ndarray, cfg: OptimizerConfig, gradient_fn) -> OptRunResult:
    if gradient_fn is None:
        method = "parameter_shift" if cfg.kind == "aqgd" else "central_fd"
        gradient_fn = lambda x: gradient(counted, x, method)  # noqa: E731

    x = x0.copy()
    eta = cfg.learning_rate
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    value_history: list[float] = []
    best_point, best_value = None, np.inf

    for t in range(1, cfg.maxiter + 1):
        g = np.asarray(gradient_fn(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise ObjectiveError(x.copy(), float(np.sum(g)))
        if cfg.kind == "adam":
            m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
            m_hat = m / (1 - ADAM_BETA1**t)
            v_hat = v / (1 - ADAM_BETA2**t)
            x = x - eta * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        else:
            x = x - eta * g
        f_x = counted(x)
        value_history.append(f_x)
        if f_x < best_value:
            best_point, best_value = x.copy(), f_x

    return OptRunResult(best_point, best_value, value_history, None, counted.calls)


def minimize(objective, x0: np.ndarray, cfg: OptimizerConfig, gradient_fn=None) -> OptRunResult:
    """Minimize ``objective`` starting at ``x0`` under the configured method.

    Raises ObjectiveError if the objective ever returns a non-finite value.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size < 1:
        raise ValueError("x0 must be a 1-d vector")
    counted = _CountedObjective(objective)
    if cfg.kind == "cobyla":
        return _minimize_cobyla(counted, x0, cfg)
    return _minimize_gradient(counted, x0, cfg, gradient_fn)


def regret_upper_bound_check(result: OptRunResult, lipschitz_l: float, f_star: float) -> bool:
    """Whether sum_t [f(theta_t) - f*] <= L * sum_t delta_t on the recorded run."""
    if result.radius_history is None:
        raise ValueError("regret check requires a run with recorded trust radii")
    regret = sum(value - f_star for value in result.value_history)
    bound = lipschitz_l * sum(result.radius_history)
    return regret <= bound
