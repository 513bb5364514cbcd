"""diskatom: atomization of Riesz measures in the unit disk.

Replaces a finite nonnegative measure by a zero set whose log-modulus
potential tracks the measure's potential in L1 over the disk and uniformly
off a small exceptional set, and certifies the resulting error bounds.
"""

from .measure import (
    Annulus,
    ClosedDisk,
    CurveProfile,
    DiskMeasure,
    PlanarCell,
    Rectangle,
    Sector,
    extract_heavy_atoms,
    moment,
    restrict,
    total_mass,
)

__version__ = "0.1.0"

__all__ = [
    "Annulus",
    "ClosedDisk",
    "CurveProfile",
    "DiskMeasure",
    "PlanarCell",
    "Rectangle",
    "Sector",
    "extract_heavy_atoms",
    "moment",
    "restrict",
    "total_mass",
    "__version__",
]
