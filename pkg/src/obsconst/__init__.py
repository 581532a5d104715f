"""Band-limited observability constants of the wave equation on the circle, flat torus and sphere."""
from .analysis import coherent_check, gap_check, mv_check, sweep, torus_closed_form
from .geometry import Arc, Band, ManifoldSpec, Polygon, Ray, Region, dwell, measure, time_in_region
from .quadform import assemble_form, band_constant, constant_upto, form_value, g1
from .raytrace import SearchConfig, alpha_bracket, g2
from .spectral import build_basis, mass_matrix

__version__ = "0.1.0"

__all__ = [
    "Arc",
    "Band",
    "ManifoldSpec",
    "Polygon",
    "Ray",
    "Region",
    "SearchConfig",
    "alpha_bracket",
    "assemble_form",
    "band_constant",
    "build_basis",
    "coherent_check",
    "constant_upto",
    "dwell",
    "form_value",
    "g1",
    "g2",
    "gap_check",
    "mass_matrix",
    "measure",
    "mv_check",
    "sweep",
    "time_in_region",
    "torus_closed_form",
]
