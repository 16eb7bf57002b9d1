"""Haar-unitary quantum expanders: exact moment engine, spectral simulator and bounds."""

__version__ = "0.1.0"
