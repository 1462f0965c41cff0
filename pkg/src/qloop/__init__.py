"""Exact verification engine for the twisted quantum loop algebra R-matrix."""

__version__ = "0.1.0"
