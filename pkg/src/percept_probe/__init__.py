"""Estimate recognition-performance variation from feature-space distances."""

__version__ = "0.1.0"
