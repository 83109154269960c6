"""Federated model distillation simulator with sampling-based privacy accounting."""

__version__ = "0.1.0"
