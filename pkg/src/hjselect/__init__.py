"""Solvers for state-constraint contact Hamilton-Jacobi equations and their
vanishing-discount selection limits."""

__version__ = "0.1.0"
