"""Euler schemes for diffusions and delay equations, with tools to measure
and explain their weak error."""

__version__ = "0.1.0"

from .grids import BrownianPath, DelayGrid, coarsen, eta, make_grid, sample_path
from .models import (DelayMeasure, DelayModel, InitialSegment, SmoothFn1D, TestFunction,
                     builtin_catalog, make_model, make_payoff, validate)
from .euler import (FrozenCoefficients, PathValues, euler_delay, euler_diffusion, frozen_coefficients,
                    reference_solution)
