"""Previsualization planning: layout, blocking, motion and camera plans."""

__version__ = "0.1.0"
