"""Quadratized and truncated SWAP-network QAOA workbench."""

__version__ = "0.1.0"
