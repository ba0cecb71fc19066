"""Simulator and verifier for measurement-driven gates on a spin-3/2
valence-bond lattice."""

__version__ = "0.1.0"
