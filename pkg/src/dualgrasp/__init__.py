"""Dual-arm grasp generation with optimization-based force-closure labeling."""

__version__ = "0.1.0"
