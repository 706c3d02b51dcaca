"""Lyapunov-Perron computation of invariant, inertial and stable manifolds."""

__version__ = "0.1.0"
