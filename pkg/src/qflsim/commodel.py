"""Analytical communication/training-time model.

Abstract time units: each participating device costs ``c_device`` to
communicate, each server aggregation costs ``c_aggregate``, and training
scales with ``alpha`` per trained entity. The baseline protocol trains and
uploads every device per round; the cluster-driven protocol trains one
representative per cluster plus one aggregation event.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clustering import cluster_count


@dataclass(frozen=True)
class CommModelParams:
    c_device: float = 1.0
    c_aggregate: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.c_device < 0 or self.c_aggregate < 0 or self.alpha < 0:
            raise ValueError("communication model costs must be >= 0")


def modeled_time_qfl(n_devices: int, comm: CommModelParams) -> tuple[float, float, float]:
    """(t_comm, t_train, t_total) per round when every device participates."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    t_comm = n_devices * comm.c_device
    t_train = comm.alpha * n_devices
    return t_comm, t_train, t_train + t_comm


def modeled_time_mdqfl(n_devices: int, comm: CommModelParams) -> tuple[float, float, float]:
    """(t_comm, t_train, t_total) per round with one representative per cluster."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    n_clusters = cluster_count(n_devices)
    t_comm = n_clusters * comm.c_device + comm.c_aggregate
    t_train = comm.alpha * n_clusters
    return t_comm, t_train, t_train + t_comm


def performance_improvement(n_devices: int, comm: CommModelParams) -> float:
    """Ratio of baseline to cluster-driven per-round total time."""
    qfl_total = modeled_time_qfl(n_devices, comm)[2]
    mdqfl_total = modeled_time_mdqfl(n_devices, comm)[2]
    if mdqfl_total == 0:
        raise ZeroDivisionError("cluster-driven total time is zero")
    return qfl_total / mdqfl_total
