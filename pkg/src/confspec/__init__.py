"""Numerical checks of conformal eigenvalue bounds on closed surfaces.

Möbius geometry of S^n, Hersch renormalization of discrete measures,
triangulated surfaces with conformal factors, P1 finite-element spectra,
conformal-volume estimates and the folded trial functions behind the
``lambda_2`` bound.
"""

from .bound_lab import BoundReport, CapSearchResult, cap_search, lambda2_upper_bound, verify_bound
from .conformal_volume import ConformalVolumeEstimate, estimate_vc, volume_under_moebius
from .hersch import RenormalizationResult, renormalize, renormalized_pushforward
from .measure import DiscreteMeasure, center_of_mass, hersch_admissible, pushforward, total_mass
from .mesh import (
    ImmersionSamples,
    SurfaceMesh,
    apply_conformal_factor,
    equilateral_torus_immersion,
    flat_torus,
    icosphere,
    klein_bottle_revolution,
    projective_plane,
)
from .spectral import SpectralSummary, assemble, eigenpairs, rayleigh_quotient
from .sphere import SphericalCap, cap_contains, cap_reflect, fold, moebius_apply, moebius_conformal_factor, reflect
from .tables import elliptic_E, genus_bound, sphere_volume, table_row

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CapSearchResult",
    "ConformalVolumeEstimate",
    "DiscreteMeasure",
    "ImmersionSamples",
    "RenormalizationResult",
    "SpectralSummary",
    "SphericalCap",
    "SurfaceMesh",
    "apply_conformal_factor",
    "assemble",
    "cap_contains",
    "cap_reflect",
    "cap_search",
    "center_of_mass",
    "eigenpairs",
    "elliptic_E",
    "equilateral_torus_immersion",
    "estimate_vc",
    "flat_torus",
    "fold",
    "genus_bound",
    "hersch_admissible",
    "icosphere",
    "klein_bottle_revolution",
    "lambda2_upper_bound",
    "moebius_apply",
    "moebius_conformal_factor",
    "projective_plane",
    "pushforward",
    "rayleigh_quotient",
    "reflect",
    "renormalize",
    "renormalized_pushforward",
    "sphere_volume",
    "table_row",
    "total_mass",
    "verify_bound",
    "volume_under_moebius",
]
