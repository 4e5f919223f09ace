"""Exact vector-field algebra: polynomials, the field DSL, Lie brackets
and the numerical bracket-spanning certificate."""

from .certificate import (
    DEFAULT_EPS_GRID,
    DEFAULT_RATIO_BOUND,
    DEFAULT_THRESHOLD,
    BracketNode,
    HormanderCertificate,
    enumerate_brackets,
    hormander_certificate,
)
from .parse import ParseError, format_field, format_scalar, parse_field, parse_scalar
from .poly import PolyExpr, VectorField, ad_power, apply_to_scalar, divergence, lie_bracket
from .surd import Surd

__all__ = [
    "BracketNode",
    "DEFAULT_EPS_GRID",
    "DEFAULT_RATIO_BOUND",
    "DEFAULT_THRESHOLD",
    "HormanderCertificate",
    "ParseError",
    "PolyExpr",
    "Surd",
    "VectorField",
    "ad_power",
    "apply_to_scalar",
    "divergence",
    "enumerate_brackets",
    "format_field",
    "format_scalar",
    "hormander_certificate",
    "lie_bracket",
    "parse_field",
    "parse_scalar",
]
