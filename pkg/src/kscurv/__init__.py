"""Curvature-condition analysis on coordinate charts via jet arithmetic."""

__version__ = "0.1.0"
