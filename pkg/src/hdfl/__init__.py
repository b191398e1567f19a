"""Numerical laboratory for classifier fragility on manifold-concentrated data."""

__version__ = "0.1.0"
