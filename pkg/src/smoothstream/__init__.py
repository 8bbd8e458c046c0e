"""Streaming temporal-smoothing attention and a toy online action detector."""

__version__ = "0.1.0"
