"""Numerical toolkit for paradifferential water-wave analysis and dispersive decay measurement."""

__version__ = "0.1.0"
