"""Desk-scale simulator for quantum federated learning.

Implements a baseline federated-averaging protocol (QFL) over variational
quantum classifiers and a model-driven variant (mdQFL) that clusters devices
by model parameters, trains one representative per cluster, and propagates
adaptive personalization/generalization updates. Includes an analytical
communication-time model and a CLI experiment runner.
"""

__version__ = "0.1.0"
