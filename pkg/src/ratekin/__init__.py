"""Mean-field kinetics of rating accuracy under Elo-style updates and assortative matching."""
from __future__ import annotations

from ._kernels import BACKEND
from .control import (
    CostParams,
    PolicySpec,
    Trajectory,
    barrier_cost,
    discounted_welfare,
    envelope_value,
    mean_field_trajectory,
    net_utility,
    optimal_eta,
    separated_policy_step,
    steady_state_welfare,
)
from .errors import DegenerateError, DomainError, RatekinError
from .meanfield import (
    AccuracyState,
    ControlTriple,
    EnvelopeCoefficients,
    ModelParams,
    VarianceBreakdown,
    covariance_numerator,
    envelope_coefficients,
    fixed_point,
    invariant_phi,
    iterate_phi,
    k_sharp,
    optimal_gain,
    optimal_scale,
    pre_scaling_variance,
    transition_psi,
)
from .rng import RngStream, resolve_seed

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AccuracyState",
    "ControlTriple",
    "CostParams",
    "DegenerateError",
    "DomainError",
    "EnvelopeCoefficients",
    "ModelParams",
    "PolicySpec",
    "RatekinError",
    "RngStream",
    "Trajectory",
    "VarianceBreakdown",
    "barrier_cost",
    "covariance_numerator",
    "discounted_welfare",
    "envelope_coefficients",
    "envelope_value",
    "fixed_point",
    "invariant_phi",
    "iterate_phi",
    "k_sharp",
    "mean_field_trajectory",
    "net_utility",
    "optimal_eta",
    "optimal_gain",
    "optimal_scale",
    "pre_scaling_variance",
    "resolve_seed",
    "separated_policy_step",
    "steady_state_welfare",
    "transition_psi",
]
