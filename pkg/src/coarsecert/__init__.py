"""Certificates for coarse-geometric properties of bounded-degree graph sequences."""

from .backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
