"""Numerical toolkit for degree-4 sum-of-squares pseudomoments of the
Sherrington-Kirkpatrick Hamiltonian."""

__version__ = "0.1.0"
