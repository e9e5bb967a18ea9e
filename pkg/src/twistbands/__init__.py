"""Commensurate twisted bilayer honeycomb potentials and their Bloch spectra.

Submodules:
    lattice       commensuration arithmetic, superlattices, symmetry data
    potential     sparse Fourier potentials, cosine families, AA/AB twisting
    spectra       truncated plane-wave Hamiltonians, Dirac detection, cone fits
    perturbation  second-order eigenvalue splitting and velocity scaling
    cli           command-line front end
"""

from . import lattice
from . import potential
from . import spectra
from . import perturbation
from . import cli

__all__ = ["lattice", "potential", "spectra", "perturbation", "cli"]
__version__ = "0.1.0"
