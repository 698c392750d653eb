"""Expectations of metric quantities of random polynomials on homogeneous manifolds."""

from .closedform import (
    ClosedForm,
    expected_excursion_volume,
    expected_intersection_measure,
    expected_leray,
    expected_level_measure,
    moment_formula,
)
from .manifold import EigenspaceSpec, make_circle_space, make_sphere_space, make_torus_space, parse_spectrum
from .sampling import PolynomialSample, SeedPolicy

__version__ = "0.1.0"

__all__ = [
    "ClosedForm",
    "EigenspaceSpec",
    "PolynomialSample",
    "SeedPolicy",
    "expected_excursion_volume",
    "expected_intersection_measure",
    "expected_leray",
    "expected_level_measure",
    "make_circle_space",
    "make_sphere_space",
    "make_torus_space",
    "moment_formula",
    "parse_spectrum",
]
