"""Grounded adaptive curriculum learning for grid navigation."""

__version__ = "0.1.0"
