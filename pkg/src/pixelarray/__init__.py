"""Pixel-array and solution-set steady-state solver for 1-D PDE discretizations."""

__version__ = "0.1.0"
