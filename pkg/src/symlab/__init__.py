"""Finite element laboratory for the planar torsion problem and its integral identities."""

__version__ = "0.1.0"

from .geometry import BoundaryCurve, GeometrySummary, geometry_summary  # noqa: E402
from .mesh import Mesh, refine, triangulate  # noqa: E402
from .torsion import ScalarField, critical_point, solve_torsion, torsional_rigidity  # noqa: E402

__all__ = ["BoundaryCurve", "GeometrySummary", "geometry_summary", "Mesh", "refine",
           "triangulate", "ScalarField", "critical_point", "solve_torsion",
           "torsional_rigidity", "__version__"]
