"""Exact Spencer spectral sequences and a lattice lab for compatible pairs on principal bundles."""

__version__ = "0.1.0"
