"""Numerical checks for the blow-up of the gradient quotient of Lipschitz
functions near their zeros."""

__version__ = "0.1.0"

from .expr import parse, unparse, evaluate, gradient, DomainError  # noqa: E402
from .fields import (  # noqa: E402
    Ball, Box, ScalarField, VectorMapping, mapping_quotient, mcshane_extend,
    quotient_V, square_field, zero_set_probe,
)
from .quad import (  # noqa: E402
    ExcisionFamily, IntegralSeries, bbm_estimate, diagnose, excision_series,
    integrate_excised,
)
from .analysis import (  # noqa: E402
    critical_exponent, minimal_multiplier, ode_uniqueness_sim, ray_integral,
    ray_survey, sobolev_check, squared_gradient_at_zero,
)
from . import cgw  # noqa: E402
