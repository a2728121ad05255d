"""Simulation of LO-free and LO-dressed Rydberg atomic receivers."""

__version__ = "0.1.0"
