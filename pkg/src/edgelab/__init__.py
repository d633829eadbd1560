"""Numerical laboratory for the soft edge of tridiagonal beta ensembles."""

__version__ = "0.1.0"
