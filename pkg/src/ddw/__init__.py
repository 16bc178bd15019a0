"""Fully distributed Dantzig-Wolfe decomposition for block-angular LPs."""

__version__ = "0.1.0"
