"""Finite-N particle system of skills and ratings.

Each period runs scale -> match -> update -> drift:

1. the pre-scaled ratings are recentred and rescaled to the target
   dispersion;
2. agents are split into two random halves, the first half is ranked by a
   noisy score ``eta*X + sqrt(1-eta^2)*v`` and the second by rating, and
   equal ranks are paired;
3. each pair observes ``S = rho_i - rho_j + omega`` and both ratings move by
   the same antisymmetric surprise step;
4. skills follow the AR(1) drift ``lam*rho + sqrt(1-lam^2)*xi``.

All moments divide by N.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels
from .control import PolicySpec, Trajectory, net_utility, policy_controls
from .errors import DegenerateError, DomainError
from .meanfield import AccuracyState, ControlTriple, ModelParams, psi
from .rng import RngStream

ScaleSource = Literal["mean_field", "empirical"]
RNG = RngStream | np.random.Generator


def _gen(stream: RNG) -> np.random.Generator:
    return stream if isinstance(stream, np.random.Generator) else stream.generator()


@dataclass
class Population:
    skills: np.ndarray
    ratings: np.ndarray
    pre_scaled: np.ndarray
    epoch: int = 0

    def __post_init__(self):
        n = self.skills.shape[0]
        if self.ratings.shape != (n,) or self.pre_scaled.shape != (n,):
            raise DomainError("skills, ratings and pre_scaled must share one length")
        if n < 2 or n % 2:
            raise DomainError(f"population size must be even and >= 2, got {n}")

    @property
    def n(self) -> int:
        return self.skills.shape[0]


@dataclass(frozen=True)
class Pairing:
    """Perfect matching between two disjoint halves: ``first[k]`` plays ``second[k]``."""

    first: np.ndarray
    second: np.ndarray

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.first, self.second])


def init_population(n: int, r0: float, stream: RNG) -> Population:
    """Population whose empirical moments are exact: unit variances, correlation ``r0``."""
    if n < 4 or n % 2:
        raise DomainError(f"n must be even and >= 4, got {n}")
    if not 0.0 <= r0 < 1.0:
        raise DomainError(f"r0 must lie in [0, 1), got {r0}")
    g = _gen(stream)
    skills = g.standard_normal(n)
    raw = g.standard_normal(n)
    skills -= skills.mean()
    raw -= raw.mean()
    raw -= (raw @ skills) / (skills @ skills) * skills
    skills /= np.sqrt(skills @ skills / n)
    raw /= np.sqrt(raw @ raw / n)
    ratings = r0 * skills + np.sqrt(1.0 - r0 * r0) * raw
    return Population(skills, ratings, ratings.copy())


def zero_population(n: int, stream: RNG) -> Population:
    """Stationary skills with every rating at 0 (the degenerate start)."""
    if n < 2 or n % 2:
        raise DomainError(f"n must be even and >= 2, got {n}")
    skills = _gen(stream).standard_normal(n)
    return Population(skills, np.zeros(n), np.zeros(n))


def skill_step(pop: Population, params: ModelParams, stream: RNG) -> None:
    shocks = _gen(stream).standard_normal(pop.n)
    pop.skills = params.lam * pop.skills + np.sqrt(1.0 - params.lam**2) * shocks


def scale_step(pop: Population, sigma_target: float) -> float:
    """Recentre and rescale ``pre_scaled`` into ``ratings``; return the factor applied."""
    if not sigma_target >= 0.0:
        raise DomainError(f"sigma_target must be non-negative, got {sigma_target}")
    centred = pop.pre_scaled - pop.pre_scaled.mean()
    spread = np.sqrt(centred @ centred / pop.n)
    if sigma_target == 0.0:
        pop.ratings = np.zeros(pop.n)
        return 0.0
    if spread == 0.0:
        raise DegenerateError("cannot rescale ratings with zero dispersion to a positive target")
    factor = sigma_target / spread
    pop.ratings = factor * centred
    return float(factor)


def match_step(pop: Population, eta: float, stream: RNG) -> Pairing:
    if not 0.0 <= eta < 1.0:
        raise DomainError(f"eta must lie in [0, 1), got {eta}")
    g = _gen(stream)
    n = pop.n
    half = n // 2
    perm = g.permutation(n)
    group1 = perm[:half]
    group2 = perm[half:]
    x = pop.ratings
    var = _kernels.moments2(x, x)[2]
    noise = g.standard_normal(half) * np.sqrt(var)
    if var == 0.0:
        # Dirac kernel: every rating is equal, so the random split is the pairing.
        return Pairing(group1, group2)
    scores = eta * x[group1] + np.sqrt(1.0 - eta * eta) * noise
    order1 = np.lexsort((group1, scores))
    order2 = np.lexsort((group2, x[group2]))
    return Pairing(group1[order1], group2[order2])


def update_step(
    pop: Population, pairing: Pairing, gain: float, params: ModelParams, stream: RNG
) -> None:
    if not gain >= 0.0:
        raise DomainError(f"gain must be non-negative, got {gain}")
    omega = _gen(stream).standard_normal(pairing.first.shape[0]) * np.sqrt(params.beta2)
    out = np.empty_like(pop.ratings)
    _kernels.pair_update(pop.ratings, pop.skills, pairing.first, pairing.second, omega, gain, out)
    pop.pre_scaled = out


def _accuracy(skills: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    _, _, v_skill, v_x, cov = _kernels.moments2(skills, x)
    if v_x <= 0.0 or v_skill <= 0.0:
        return 0.0, float(np.sqrt(max(v_x, 0.0)))
    return float(cov / np.sqrt(v_skill * v_x)), float(np.sqrt(v_x))


def empirical_state(pop: Population) -> AccuracyState:
    """Population-moment estimate of ``(r, sigma)`` from the current ratings.

    Negative correlations (possible at tiny N) are clipped to 0 for the
    typed state; :func:`run_trajectory` records the raw value.
    """
    r, sigma = _accuracy(pop.skills, pop.ratings)
    if sigma == 0.0:
        return AccuracyState(0.0, 0.0)
    return AccuracyState(min(max(r, 0.0), 1.0), sigma)


def cycle(pop: Population, control: ControlTriple, params: ModelParams, streams) -> None:
    """One full period: scale, match, update, drift."""
    scale_step(pop, control.scale)
    pairing = match_step(pop, control.assortativity, streams["match"])
    update_step(pop, pairing, control.gain, params, streams["outcome"])
    skill_step(pop, params, streams["skill"])
    pop.epoch += 1


def trajectory_streams(stream: RngStream) -> dict[str, np.random.Generator]:
    """Independent generators per purpose, derived from one trajectory stream."""
    return {k: stream.substream(k).generator() for k in ("init", "skill", "match", "outcome")}


def run_trajectory(
    n: int,
    horizon: int,
    policy: PolicySpec,
    params: ModelParams,
    stream: RngStream,
    scale_source: ScaleSource = "mean_field",
    r0: float = 0.0,
    start: Literal["exact", "zero"] = "exact",
) -> Trajectory:
    """Simulate ``horizon`` periods of an ``n``-agent system.

    ``start="exact"`` builds the initial population with exact moments at
    ``r0``. ``start="zero"`` starts from all-zero ratings, runs one
    degenerate period with the policy's gain and assortativity, and reports
    from the first non-degenerate period onward (relabelled t = 0); ``r0`` is
    then ignored.

    Row ``t`` holds the accuracy ``r_t`` measured on the pre-scaled ratings,
    the realised dispersion after the period's scale step, the controls and
    ``eta*r_t**2 - C(eta)``. ``scale_source`` decides which accuracy the
    policy sees: the deterministic mean-field recursion (default; no access
    to latent skills) or the empirical ``r_t``.
    """
    if horizon < 0:
        raise DomainError(f"horizon must be non-negative, got {horizon}")
    if scale_source not in ("mean_field", "empirical"):
        raise DomainError(f"unknown scale_source {scale_source!r}")
    streams = trajectory_streams(stream)
    if start == "exact":
        pop = init_population(n, r0, streams["init"])
    elif start == "zero":
        pop = zero_population(n, streams["init"])
        boot = policy_controls(policy, 0.0, params)
        cycle(pop, ControlTriple(boot.gain, boot.assortativity, 0.0), params, streams)
        pop.epoch = 0
        r_model = float(psi(0.0, boot.gain, boot.assortativity, 0.0, params))
    else:
        raise DomainError(f"unknown start {start!r}")
    if start == "exact":
        r_model = float(r0)

    acc = np.empty(horizon + 1)
    disp = np.empty(horizon + 1)
    util = np.empty(horizon + 1)
    controls = []
    for t in range(horizon + 1):
        r_emp, _ = _accuracy(pop.skills, pop.pre_scaled)
        r_seen = r_emp if scale_source == "empirical" else r_model
        control = policy_controls(policy, min(max(r_seen, 0.0), 1.0), params)
        acc[t] = r_emp
        util[t] = net_utility(r_emp, control.assortativity, policy.cost)
        controls.append(control)
        scale_step(pop, control.scale)
        disp[t] = _accuracy(pop.skills, pop.ratings)[1]
        if t == horizon:
            break
        pairing = match_step(pop, control.assortativity, streams["match"])
        update_step(pop, pairing, control.gain, params, streams["outcome"])
        skill_step(pop, params, streams["skill"])
        pop.epoch += 1
        r_in = min(max(r_model, 0.0), 1.0) if control.scale > 0.0 else 0.0
        r_model = float(psi(r_in, control.gain, control.assortativity, control.scale, params))
    meta = {
        "n": n,
        "seed": stream.seed,
        "stream_id": stream.stream_id,
        "params": params,
        "policy": policy,
        "scale_source": scale_source,
        "r0": r0,
        "start": start,
        "backend": _kernels.BACKEND,
    }
    return Trajectory(acc, disp, controls, util, meta)
