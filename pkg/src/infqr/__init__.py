"""Infinite-dimensional QR iteration toolkit."""

from . import operators, iqr

__all__ = ["operators", "iqr"]
__version__ = "0.1.0"
