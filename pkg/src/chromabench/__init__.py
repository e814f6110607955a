"""Spectral rendering, illuminant estimation and camera-sensitivity adaptation."""

__version__ = "0.1.0"
