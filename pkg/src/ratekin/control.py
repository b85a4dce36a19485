"""Platform decision layer: sorting cost, match utility, and policies.

Only the barrier cost ``C(eta) = kappa_c * (1/(1 - eta) - 1)`` is
implemented. Under it the myopic matching problem ``max_eta eta r^2 - C(eta)``
has the closed-form solution ``eta* = max(0, 1 - sqrt(kappa_c)/r)`` with value
``max(0, r - sqrt(kappa_c))**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DomainError
from .meanfield import (
    AccuracyState,
    ControlTriple,
    ModelParams,
    invariant_phi,
    optimal_gain,
    optimal_scale,
    psi,
)

PolicyMode = Literal["fixed", "optimal_separated", "signal_matched"]


@dataclass(frozen=True)
class CostParams:
    kappa_c: float = 0.04
    discount: float = 0.95

    def __post_init__(self):
        if not self.kappa_c > 0.0:
            raise DomainError(f"kappa_c must be positive, got {self.kappa_c}")
        if not 0.0 < self.discount < 1.0:
            raise DomainError(f"discount must lie in (0, 1), got {self.discount}")


@dataclass(frozen=True)
class PolicySpec:
    """How controls are chosen each period.

    ``fixed``
        ``fixed_controls`` every period.
    ``optimal_separated``
        optimal gain, signal-matched scale, myopic ``eta*`` under ``cost``.
    ``signal_matched``
        gain and assortativity from ``fixed_controls``, scale set to the
        current accuracy (the adaptive regime of the invariance study).

    ``cost`` is also used for welfare accounting under the other two modes.
    """

    mode: PolicyMode = "fixed"
    fixed_controls: ControlTriple | None = None
    cost: CostParams = field(default_factory=CostParams)

    def __post_init__(self):
        if self.mode not in ("fixed", "optimal_separated", "signal_matched"):
            raise DomainError(f"unknown policy mode {self.mode!r}")
        if self.mode != "optimal_separated":
            if self.fixed_controls is None:
                raise DomainError(f"policy mode {self.mode!r} needs fixed_controls")
            if self.fixed_controls.gain <= 0.0:
                raise DomainError("policy gain must be positive")


@dataclass
class Trajectory:
    """Time series produced by a simulation or a mean-field iteration.

    ``accuracy``, ``dispersion``, ``utility`` and ``controls`` all have
    ``horizon + 1`` entries; the controls of the last entry are the ones the
    policy prescribes at the terminal state (only its scale is applied).
    """

    accuracy: np.ndarray
    dispersion: np.ndarray
    controls: list[ControlTriple]
    utility: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.accuracy) - 1

    def gains(self) -> np.ndarray:
        return np.array([c.gain for c in self.controls])

    def etas(self) -> np.ndarray:
        return np.array([c.assortativity for c in self.controls])

    def scales(self) -> np.ndarray:
        return np.array([c.scale for c in self.controls])


def _check_eta(eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0.0):
        raise DomainError("eta must be non-negative")
    if np.any(eta >= 1.0):
        raise DomainError("barrier cost diverges at eta >= 1")
    return eta


def barrier_cost(eta, cost: CostParams):
    eta = _check_eta(eta)
    out = cost.kappa_c * (1.0 / (1.0 - eta) - 1.0)
    return float(out) if out.ndim == 0 else out


def net_utility(r, eta, cost: CostParams):
    """Match quality ``eta * r**2`` minus the sorting cost."""
    eta = _check_eta(eta)
    out = eta * np.asarray(r, dtype=float) ** 2 - barrier_cost(eta, cost)
    return float(out) if np.ndim(out) == 0 else out


def optimal_eta(r: float, cost: CostParams) -> float:
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"r must lie in [0, 1], got {r}")
    if r == 0.0:
        return 0.0
    return max(0.0, 1.0 - math.sqrt(cost.kappa_c) / r)


def envelope_value(r: float, cost: CostParams) -> float:
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"r must lie in [0, 1], got {r}")
    return max(0.0, r - math.sqrt(cost.kappa_c)) ** 2


def separated_policy_step(
    state: AccuracyState, cost: CostParams, params: ModelParams
) -> tuple[ControlTriple, float, float]:
    """Controls, next accuracy and period utility of the separated policy."""
    if not 0.0 < params.lam < 1.0:
        raise DomainError(f"lam must lie in (0, 1), got {params.lam}")
    r = state.r
    control = ControlTriple(optimal_gain(r, params), optimal_eta(r, cost), optimal_scale(r))
    return control, invariant_phi(r, params), envelope_value(r, cost)


def discounted_welfare(utilities, discount: float) -> float:
    """Finite-horizon ``sum_t discount**t * u_t``."""
    if not 0.0 < discount < 1.0:
        raise DomainError(f"discount must lie in (0, 1), got {discount}")
    u = np.asarray(utilities, dtype=float)
    return float(np.sum(discount ** np.arange(u.size) * u))


def steady_state_welfare(r_inf: float, cost: CostParams, horizon: int | None = None) -> float:
    """Welfare of holding ``r_inf`` forever (or for ``horizon`` periods)."""
    v = envelope_value(r_inf, cost)
    d = cost.discount
    if horizon is None:
        return v / (1.0 - d)
    return v * (1.0 - d**horizon) / (1.0 - d)


def policy_controls(policy: PolicySpec, r: float, params: ModelParams) -> ControlTriple:
    """Controls the policy applies when its accuracy estimate is ``r``."""
    if policy.mode == "fixed":
        return policy.fixed_controls
    if policy.mode == "signal_matched":
        fc = policy.fixed_controls
        return ControlTriple(fc.gain, fc.assortativity, optimal_scale(r))
    r_eff = min(max(r, 0.0), 1.0)
    gain = optimal_gain(min(r_eff, 1.0 - 1e-15), params)
    return ControlTriple(gain, optimal_eta(r_eff, policy.cost), r_eff)


def mean_field_trajectory(
    policy: PolicySpec, params: ModelParams, r0: float, horizon: int
) -> Trajectory:
    """Iterate the exact accuracy map under ``policy`` from ``r0``.

    Fixed-scale policies keep ``r0`` as the initial accuracy even when the
    scale is positive; a zero scale forces the degenerate convention, so
    the next accuracy is computed with ``r = 0``.
    """
    acc = np.empty(horizon + 1)
    disp = np.empty(horizon + 1)
    util = np.empty(horizon + 1)
    controls = []
    r = float(r0)
    for t in range(horizon + 1):
        c = policy_controls(policy, r, params)
        acc[t] = r
        disp[t] = c.scale
        util[t] = net_utility(r, c.assortativity, policy.cost)
        controls.append(c)
        if t < horizon:
            r_in = r if c.scale > 0.0 else 0.0
            r = float(psi(r_in, c.gain, c.assortativity, c.scale, params))
    meta = {"source": "mean_field", "params": params, "policy": policy, "r0": r0}
    return Trajectory(acc, disp, controls, util, meta)
