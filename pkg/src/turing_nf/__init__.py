"""Turing patterns, Bloch spectra and lattice normal forms for reaction-diffusion systems."""

__version__ = "0.1.0"
