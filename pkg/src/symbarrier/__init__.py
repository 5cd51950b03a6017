"""Numerical toolkit for symplectic barriers: grids of codimension-two
symplectic planes that every large enough embedded ball must meet."""

__version__ = "0.1.0"
