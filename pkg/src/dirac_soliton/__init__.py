"""Localized standing waves of the cubic-type nonlinear Dirac equation near
the nonrelativistic limit, built as corrections to NLS ground states."""

__version__ = "0.1.0"
