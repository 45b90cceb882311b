"""Kicked damped Kerr oscillator: Wigner negativity and chaos indicators."""

__version__ = "0.1.0"
