"""Numerical laboratory for nonlocal evolution equations with rough symmetric kernels."""

__version__ = "0.1.0"
