"""Deterministic figure rendering for nlh CSV series."""

__version__ = "0.1.0"
