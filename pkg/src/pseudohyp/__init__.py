"""Computational toolkit for spacelike p-submanifolds of the
pseudo-hyperbolic quadric H^{p,q}."""

__version__ = "0.1.0"
