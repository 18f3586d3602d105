"""Numerical lab for gravitationally induced entanglement between two atom interferometers."""

__version__ = "0.1.0"
