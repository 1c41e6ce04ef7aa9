"""Induced almost paracontact structures on affine hypersurfaces of para-complex space."""

from .errors import ParacontactError
from .exprlang import ImmersionSpec, format_immersion, parse_immersion
from .families import builtin_example
from .verify import CheckReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "ImmersionSpec",
    "ParacontactError",
    "builtin_example",
    "format_immersion",
    "parse_immersion",
    "run_suite",
]
