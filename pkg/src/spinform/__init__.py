"""Spinorial construction of H = 1/2 surfaces in H^2 x R and R^(1,2)."""

__version__ = "0.1.0"
