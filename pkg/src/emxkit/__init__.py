"""Finite-scale monotone compression schemes, Kuratowski decompositions and EMX learning."""

__version__ = "0.1.0"
