"""Numerical laboratory for Sobolev density and cut-off constructions on curved manifolds."""

__version__ = "0.1.0"
