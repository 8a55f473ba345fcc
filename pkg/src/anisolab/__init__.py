"""Pseudo-spectral laboratory for anisotropic dyadic-norm analysis of
3-D incompressible flow decompositions on a periodic box."""

from .grid import Grid
from .field import ScalarField, VectorField

__version__ = "0.1.0"
