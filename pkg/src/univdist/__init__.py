"""Exact homological linear algebra for universal ordinary distributions.

The package constructs the universal ordinary distribution at finite
squarefree level, its standard resolution and double complex, universal
Kolyvagin classes and the canonical invariant basis, and machine-checks
the structural identities relating them by exact linear algebra over Z
and Z/MZ.
"""

from .errors import (
    AdmissibilityError,
    ContradictionError,
    LevelMismatchError,
    NotGeneratorError,
    NotHomomorphismError,
    WindowError,
)

__all__ = [
    "AdmissibilityError",
    "ContradictionError",
    "LevelMismatchError",
    "NotGeneratorError",
    "NotHomomorphismError",
    "WindowError",
]

__version__ = "0.1.0"
