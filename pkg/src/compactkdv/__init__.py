"""Spectral solver for generalised KdV equations on the compactified real line."""

__version__ = "0.1.0"
