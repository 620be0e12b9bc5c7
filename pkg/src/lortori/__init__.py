"""Numerical laboratory for timelike eikonal solutions on Lorentzian 2-tori."""

__version__ = "0.1.0"
