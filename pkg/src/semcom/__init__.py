"""Coarse-to-fine semantic communication for text over simulated wireless channels."""

__version__ = "0.1.0"
