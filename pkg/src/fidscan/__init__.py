"""DMRG fidelity and entanglement toolkit for the spin-1 anisotropic XXZ chain."""

__version__ = "0.1.0"
