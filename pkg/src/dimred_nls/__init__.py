"""Numerical laboratory for the 3D-to-2D reduction of the focusing cubic NLS."""

__version__ = "0.1.0"
