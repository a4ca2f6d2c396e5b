"""Federated reinforcement-learning cell sleep control: simulator, attacks,
robust aggregation defenses, and a reproducible benchmark CLI."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
