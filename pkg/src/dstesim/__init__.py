"""Discrete-event simulator for per-class bandwidth allocation on TE links."""

__version__ = "0.1.0"
