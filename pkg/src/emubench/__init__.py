"""Desk-scale benchmarking toolkit for climate emulators.

Generates gridded ensembles with known forced signal and tunable internal
variability, fits linear-pattern-scaling and neural-network emulators, and
scores them with latitude-weighted benchmark metrics plus bias-variance and
Fourier diagnostics.
"""

__version__ = "0.1.0"
