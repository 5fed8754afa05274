"""Unitary dynamics and Markov description of the beam magnetization
difference in anisotropic Heisenberg spin ladders."""

__version__ = "0.1.0"

from .basis import LadderGeometry, SectorBasis, build_basis, x_eigenvalue
from .hamiltonian import LadderHamiltonian, SpectralBounds, spectral_bounds
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "LadderGeometry",
    "LadderHamiltonian",
    "SectorBasis",
    "SpectralBounds",
    "build_basis",
    "spectral_bounds",
    "x_eigenvalue",
]
