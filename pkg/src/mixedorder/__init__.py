"""Exact and Monte Carlo diagnostics of symmetry breaking in mixed qubit states."""

__version__ = "0.1.0"
