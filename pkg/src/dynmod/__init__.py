"""Adaptive outer-loop control of robots behind a sealed inner joint servo."""

__version__ = "0.1.0"
