"""Simulation and verification of functional limits for partial maxima."""
__version__ = "0.1.0"
