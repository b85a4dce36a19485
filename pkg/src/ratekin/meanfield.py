"""Closed-form moment dynamics of the Gaussian mean-field rating model.

The state of the limiting population is the pair ``(r, sigma)``: the
skill/rating correlation and the rating dispersion. One period with gain
``K``, assortativity ``eta`` and scale ``sigma`` maps ``r`` to

    r' = lam * N / sqrt(Lambda2)

where ``N = Cov(rho, X~)`` and ``Lambda2 = Var(X~)`` are taken over the
post-update, pre-rescaling rating ``X~``. ``sigma`` is always the dispersion
in force during the period (the one used for matching and updating), so
``r'`` does not depend on the next period's target scale.

The scalar helpers (:func:`psi`, :func:`numerator`, :func:`phi`, ...)
broadcast over numpy arrays; the ``transition_psi``-style wrappers take the
typed records.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, DomainError


@dataclass(frozen=True)
class ModelParams:
    """Environment constants: skill persistence ``lam`` and outcome-noise variance ``beta2``."""

    lam: float = 0.99
    beta2: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.beta2 > 0.0:
            raise DomainError(f"beta2 must be positive, got {self.beta2}")


@dataclass(frozen=True)
class ControlTriple:
    """Per-period platform controls.

    ``gain`` (K) may be 0, which means "no update"; policies always use K > 0.
    ``scale`` 0 is only meaningful as the degenerate initial period.
    """

    gain: float
    assortativity: float
    scale: float

    def __post_init__(self):
        if not self.gain >= 0.0:
            raise DomainError(f"gain must be non-negative, got {self.gain}")
        if not 0.0 <= self.assortativity < 1.0:
            raise DomainError(f"assortativity must lie in [0, 1), got {self.assortativity}")
        if not self.scale >= 0.0:
            raise DomainError(f"scale must be non-negative, got {self.scale}")


@dataclass(frozen=True)
class AccuracyState:
    r: float
    sigma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise DomainError(f"r must lie in [0, 1], got {self.r}")
        if not self.sigma >= 0.0:
            raise DomainError(f"sigma must be non-negative, got {self.sigma}")
        if self.sigma == 0.0 and self.r != 0.0:
            raise DomainError("a degenerate state (sigma = 0) must carry r = 0")


@dataclass(frozen=True)
class VarianceBreakdown:
    """Components of ``Var(X~)``; ``total`` is their sum."""

    var_rating: float
    var_skill_mismatch: float
    var_outcome_noise: float
    cross_cov: float
    total: float


@dataclass(frozen=True)
class EnvelopeCoefficients:
    """``G(y) = (a + b*y) / (c + d*y)`` with ``y = (sigma - r)**2``."""

    a: float
    b: float
    c: float
    d: float

    def __call__(self, y):
        return (self.a + self.b * y) / (self.c + self.d * y)


# ---------------------------------------------------------------------------
# broadcasting scalar formulas

def numerator(r, gain, eta, sigma):
    """``Cov(rho_t, X~_{t+1}) = r*sigma*(1 - K*(1-eta)) + K*(1 - eta*r**2)``."""
    return r * sigma * (1.0 - gain * (1.0 - eta)) + gain * (1.0 - eta * r * r)


def variance_components(r, gain, eta, sigma, beta2):
    """Return ``(Var A, Var B_rho, Var B_omega, 2 Cov(A, B_rho))``."""
    var_a = sigma * sigma * ((1.0 - gain) ** 2 + gain * gain + 2.0 * gain * (1.0 - gain) * eta)
    var_b_rho = 2.0 * gain * gain * (1.0 - eta * r * r)
    var_b_omega = gain * gain * beta2
    cross = 2.0 * gain * (1.0 - eta) * r * sigma * (1.0 - 2.0 * gain)
    return var_a, var_b_rho, var_b_omega, cross


def quadratic_coefficients(r, eta, sigma, beta2):
    """Coefficients ``(u, v, w)`` with ``Lambda2 = u + v*K + w*K**2``."""
    u = sigma * sigma
    v = 2.0 * (1.0 - eta) * sigma * (r - sigma)
    w = beta2 + 2.0 * (1.0 - r * r) + 2.0 * (1.0 - eta) * (sigma - r) ** 2
    return u, v, w


def affine_coefficients(r, eta, sigma):
    """Coefficients ``(p, q)`` with ``N = p + q*K``."""
    return r * sigma, 1.0 - eta * r * r - (1.0 - eta) * r * sigma


def lambda2(r, gain, eta, sigma, beta2):
    """Pre-scaling variance as the sum of its four components."""
    var_a, var_b_rho, var_b_omega, cross = variance_components(r, gain, eta, sigma, beta2)
    return var_a + var_b_rho + var_b_omega + cross


def psi(r, gain, eta, sigma, params: ModelParams):
    """One-period accuracy map ``r -> lam * N / sqrt(Lambda2)``."""
    lam2 = lambda2(r, gain, eta, sigma, params.beta2)
    if np.any(np.asarray(lam2) <= 0.0):
        raise DegenerateError("pre-scaling variance vanished (scale = 0 with gain = 0)")
    return params.lam * numerator(r, gain, eta, sigma) / np.sqrt(lam2)


def phi(r, params: ModelParams):
    """Accuracy map under optimal gain and signal-matched scale."""
    one_m = 1.0 - r * r
    return params.lam * np.sqrt(r * r + one_m * one_m / (params.beta2 + 2.0 * one_m))


# ---------------------------------------------------------------------------
# typed operations

def _check_r(r, upper_open=False):
    ok = 0.0 <= r < 1.0 if upper_open else 0.0 <= r <= 1.0
    if not ok:
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise DomainError(f"r must lie in {bound}, got {r}")


def transition_psi(state: AccuracyState, control: ControlTriple, params: ModelParams) -> float:
    """Next-period accuracy. ``control.scale`` is the dispersion in force this period."""
    return float(psi(state.r, control.gain, control.assortativity, control.scale, params))


def pre_scaling_variance(
    state: AccuracyState, control: ControlTriple, params: ModelParams
) -> VarianceBreakdown:
    parts = variance_components(
        state.r, control.gain, control.assortativity, control.scale, params.beta2
    )
    return VarianceBreakdown(*(float(x) for x in parts), total=float(sum(parts)))


def covariance_numerator(state: AccuracyState, control: ControlTriple) -> float:
    return float(numerator(state.r, control.gain, control.assortativity, control.scale))


def invariant_phi(r: float, params: ModelParams) -> float:
    _check_r(r)
    return float(phi(r, params))


def optimal_gain(r: float, params: ModelParams) -> float:
    """Gain maximising next-period accuracy at signal-matched scale."""
    _check_r(r)
    one_m = 1.0 - r * r
    return one_m / (2.0 * one_m + params.beta2)


def optimal_scale(r: float) -> float:
    _check_r(r)
    return float(r)


def k_sharp(sigma: float, r: float, eta: float, params: ModelParams) -> tuple[float, float]:
    """Maximiser over all real K of ``N**2 / Lambda2`` at fixed ``sigma``, and the maximum.

    The maximum is returned in closed form,
    ``4(p^2 w - p q v + q^2 u) / (4 u w - v^2)``; the denominator is
    ``4 sigma^2 (beta2 + 2(1 - r^2) + (1 - eta^2)(sigma - r)^2) > 0``.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if not 0.0 <= eta < 1.0:
        raise DomainError(f"eta must lie in [0, 1), got {eta}")
    u, v, w = quadratic_coefficients(r, eta, sigma, params.beta2)
    p, q = affine_coefficients(r, eta, sigma)
    k = (2.0 * q * u - p * v) / (2.0 * p * w - q * v)
    env = 4.0 * (p * p * w - p * q * v + q * q * u) / (4.0 * u * w - v * v)
    return float(k), float(env)


def envelope_coefficients(r: float, eta: float, params: ModelParams) -> EnvelopeCoefficients:
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if not 0.0 <= eta < 1.0:
        raise DomainError(f"eta must lie in [0, 1), got {eta}")
    r2 = r * r
    b2 = params.beta2
    one_m_eta2 = 1.0 - eta * eta
    return EnvelopeCoefficients(
        a=r2 * r2 - r2 * b2 - 1.0,
        b=-one_m_eta2 * r2,
        c=2.0 * r2 - b2 - 2.0,
        d=-one_m_eta2,
    )


def _fixed_point_root(lam: float, beta2: float) -> float:
    # H(x) = (lam^2 - 2) x^2 + ((1 - lam^2)(beta2 + 2) + 2 lam^2) x - lam^2;
    # both roots are positive, the smaller one lies in (0, lam^2).
    l2 = lam * lam
    a = l2 - 2.0
    b = (1.0 - l2) * (beta2 + 2.0) + 2.0 * l2
    disc = b * b + 4.0 * a * l2
    return 2.0 * l2 / (b + math.sqrt(disc))


def fixed_point(params: ModelParams, tol: float = 1e-12) -> float:
    """Unique fixed point of :func:`phi` in ``(0, lam)``.

    Solved from the quadratic in ``x = r**2`` and polished with Newton steps
    on ``phi(r) - r``. ``lam = 1`` has no interior fixed point (the static
    limit is 1); callers handle it.
    """
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    if not 0.0 < params.lam < 1.0:
        raise DomainError(f"fixed point needs 0 < lam < 1, got {params.lam}")
    r = math.sqrt(_fixed_point_root(params.lam, params.beta2))
    for _ in range(3):
        g = float(phi(r, params)) - r
        h = 1e-7
        dg = (float(phi(r + h, params)) - float(phi(r - h, params))) / (2 * h) - 1.0
        step = g / dg
        r -= step
        if abs(step) < 1e-16:
            break
    if abs(float(phi(r, params)) - r) > tol or not 0.0 < r < params.lam:
        raise DegenerateError(f"fixed point verification failed at r = {r!r}")
    return r


def iterate_phi(r0: float, steps: int, params: ModelParams) -> np.ndarray:
    """``[r0, phi(r0), phi(phi(r0)), ...]`` with ``steps + 1`` entries."""
    _check_r(r0, upper_open=True)
    out = np.empty(steps + 1)
    out[0] = r0
    for t in range(steps):
        out[t + 1] = phi(out[t], params)
    return out
