"""Exact-arithmetic toolkit for finite higher-rank graphs and their
path-space measures and operator representations."""

__version__ = "0.1.0"
