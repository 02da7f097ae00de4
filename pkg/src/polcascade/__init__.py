"""Correlation spectroscopy of an anharmonic polariton ladder."""

__version__ = "0.1.0"
