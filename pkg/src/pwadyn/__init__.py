"""Exact symbolic dynamics for piecewise affine surface maps."""

__version__ = "0.1.0"
