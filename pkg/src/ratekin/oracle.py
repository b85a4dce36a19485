"""Brute-force Monte Carlo of one mean-field period with a shadow opponent.

A representative agent ``(rho, X)`` is drawn from the exact bivariate
Gaussian with ``Var rho = 1``, ``Var X = sigma**2``, ``Corr = r``. Its
opponent is coupled through the matching kernel:

    X'   = eta * X + sqrt(1 - eta**2) * Z,          Z ~ N(0, sigma**2)
    rho' = (r / sigma) * X' + sqrt(1 - r**2) * zeta

and the agent's pre-scaled rating and next skill are

    X~       = (1 - K) X + K X' + K (rho - rho') + K omega
    rho_next = lam * rho + sqrt(1 - lam**2) * xi

All population means are zero by construction, so second moments are
estimated as plain sample means of products, each with standard error
``std / sqrt(n)``. The correlation estimate uses its delta-method influence
function for the standard error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateError, DomainError
from .meanfield import AccuracyState, ControlTriple, ModelParams
from .particles import _gen
from .rng import RngStream

CHUNK = 1 << 17
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_error: float
    n_samples: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_error

    def z(self, target: float) -> float:
        return (self.value - target) / self.std_error if self.std_error > 0 else 0.0


@dataclass(frozen=True)
class ShadowSample:
    """Draws of the coupled variables for one period (arrays of equal length)."""

    rho: np.ndarray
    x: np.ndarray
    rho_op: np.ndarray
    x_op: np.ndarray
    x_tilde_next: np.ndarray
    rho_next: np.ndarray


@dataclass(frozen=True)
class ShadowStepEstimate:
    psi: MomentEstimate
    lambda2: MomentEstimate
    var_rating: MomentEstimate
    var_skill_mismatch: MomentEstimate
    var_outcome_noise: MomentEstimate
    cross_cov: MomentEstimate
    numerator: MomentEstimate

    @property
    def breakdown(self) -> tuple[MomentEstimate, MomentEstimate, MomentEstimate, MomentEstimate]:
        return self.var_rating, self.var_skill_mismatch, self.var_outcome_noise, self.cross_cov


@dataclass(frozen=True)
class OpponentMoments:
    corr_x_xop: MomentEstimate
    cov_rho_xop: MomentEstimate
    cov_rho_rhoop: MomentEstimate
    var_rhoop: MomentEstimate


def _mean_estimate(s1: float, s2: float, n: int) -> MomentEstimate:
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return MomentEstimate(mean, float(np.sqrt(var / n)), n)


def _corr_estimate(sxx, syy, sxy, sx2y2, sx3y, sxy3, sx4, sy4, n) -> MomentEstimate:
    # zero-mean correlation rho = mxy / sqrt(mxx myy); influence
    # psi_i = x y / sqrt(mxx myy) - rho/2 (x^2/mxx + y^2/myy), which has sample mean 0.
    mxx, myy, mxy = sxx / n, syy / n, sxy / n
    a = 1.0 / np.sqrt(mxx * myy)
    rho = mxy * a
    e_sq = (
        a * a * sx2y2
        + 0.25 * rho * rho * (sx4 / mxx**2 + 2.0 * sx2y2 / (mxx * myy) + sy4 / myy**2)
        - a * rho * (sx3y / mxx + sxy3 / myy)
    ) / n
    return MomentEstimate(float(rho), float(np.sqrt(max(e_sq, 0.0) / n)), n)


def _draw_chunk(g: np.random.Generator, m: int):
    z = g.standard_normal((6, m))
    return z[0], z[1], z[2], z[3], z[4], z[5]


def _check(r: float, sigma: float, n_samples: int, min_samples: int):
    if not sigma > 0.0:
        raise DegenerateError(f"oracle needs sigma > 0, got {sigma}")
    if not 0.0 <= r < 1.0:
        raise DomainError(f"r must lie in [0, 1), got {r}")
    if n_samples < min_samples:
        raise DomainError(f"n_samples must be at least {min_samples}, got {n_samples}")


def shadow_draws(
    state: AccuracyState, control: ControlTriple, params: ModelParams, n_samples: int, stream
) -> ShadowSample:
    """Materialise the coupled variables (for inspection and small tests)."""
    r, sigma = state.r, control.scale
    _check(r, sigma, n_samples, 1)
    rho, e1, e2, zeta, eps, xi = _draw_chunk(_gen(stream), n_samples)
    x, x_op, rho_op, _, _, _, xt, rn = _kernels._shadow_terms(
        rho, e1, e2, zeta, eps, xi, r, sigma, control.gain, control.assortativity,
        np.sqrt(params.beta2), params.lam,
    )
    return ShadowSample(rho, x, rho_op, x_op, xt, rn)


def sample_shadow_step(
    state: AccuracyState,
    control: ControlTriple,
    params: ModelParams,
    n_samples: int,
    stream: RngStream | np.random.Generator,
) -> ShadowStepEstimate:
    """Monte Carlo estimates of next accuracy, pre-scaling variance and its parts.

    ``control.scale`` is the dispersion in force (as for the closed-form map).
    Draws are generated in chunks of ``CHUNK`` samples and reduced by the
    active kernel backend.
    """
    r, sigma = state.r, control.scale
    _check(r, sigma, n_samples, MIN_SAMPLES)
    g = _gen(stream)
    beta = float(np.sqrt(params.beta2))
    acc = np.zeros(_kernels.N_SHADOW)
    done = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        acc += _kernels.shadow_sums(
            *_draw_chunk(g, m), r, sigma, control.gain, control.assortativity, beta, params.lam
        )
        done += m
    s = dict(zip(_kernels.SHADOW_FIELDS, acc))
    n = n_samples
    return ShadowStepEstimate(
        psi=_corr_estimate(s["x2"], s["xt2"], s["xy"], s["x2y2"], s["x3y"], s["xy3"],
                           s["x4"], s["xt4"], n),
        lambda2=_mean_estimate(s["xt2"], s["xt4"], n),
        var_rating=_mean_estimate(s["a2"], s["a4"], n),
        var_skill_mismatch=_mean_estimate(s["brho2"], s["brho4"], n),
        var_outcome_noise=_mean_estimate(s["bom2"], s["bom4"], n),
        cross_cov=_mean_estimate(s["cross"], s["cross2"], n),
        numerator=_mean_estimate(s["num"], s["num2"], n),
    )


def opponent_moment_checks(
    state: AccuracyState, eta: float, n_samples: int, stream: RngStream | np.random.Generator
) -> OpponentMoments:
    """Sampled opponent moments; targets are ``eta``, ``eta r sigma``, ``eta r^2`` and 1."""
    r, sigma = state.r, state.sigma
    _check(r, sigma, n_samples, 1)
    if not 0.0 <= eta < 1.0:
        raise DomainError(f"eta must lie in [0, 1), got {eta}")
    rho, e1, e2, zeta, _, _ = _draw_chunk(_gen(stream), n_samples)
    x = sigma * (r * rho + np.sqrt(1.0 - r * r) * e1)
    x_op = eta * x + np.sqrt(1.0 - eta * eta) * sigma * e2
    rho_op = (r / sigma) * x_op + np.sqrt(1.0 - r * r) * zeta
    n = n_samples

    def mean_of(v):
        return _mean_estimate(float(v.sum()), float((v * v).sum()), n)

    xx, yy, xy = x * x, x_op * x_op, x * x_op
    corr = _corr_estimate(xx.sum(), yy.sum(), xy.sum(), (xy * xy).sum(), (xx * xy).sum(),
                          (xy * yy).sum(), (xx * xx).sum(), (yy * yy).sum(), n)
    return OpponentMoments(
        corr_x_xop=corr,
        cov_rho_xop=mean_of(rho * x_op),
        cov_rho_rhoop=mean_of(rho * rho_op),
        var_rhoop=mean_of(rho_op * rho_op),
    )
