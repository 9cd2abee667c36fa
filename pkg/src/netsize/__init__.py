"""Distributed network-size estimation: simulator and verification tools."""

__version__ = "0.1.0"
