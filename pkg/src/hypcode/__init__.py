"""Symbolic coding of hyperbolic model flows by topological Markov flows."""

__version__ = "0.1.0"
