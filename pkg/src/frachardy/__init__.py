"""Numerical laboratory for fractional (s,p)-Hardy inequalities on grid domains."""

from .params import EnergyParams
from .geometry import (DomainError, GridDomain, SlitSnowflakeSpec, build_domain,
                       distance_field, domain_from_json, domain_to_json)
from .whitney import DyadicCube, WhitneyDecomposition, dilate, whitney_decompose
from .energy import (EXTERIOR, HARDY, EnergyForm, GridFunction, WeightField, clamp01,
                     seminorm_p, seminorm_zero_extended_p, weight_field, weighted_mass,
                     whitney_cutoff)
from .capacity import (CapacityResult, CompactCellSet, capacity_upper_bound,
                       slit_test_family, solve_capacity)

__version__ = "0.1.0"
