"""Tripods in uniform spanning trees on the hexagonal lattice."""

__version__ = "0.1.0"
