"""Finite-size charged-particle radiation reaction with an exact delayed self-force."""

__version__ = "0.1.0"
