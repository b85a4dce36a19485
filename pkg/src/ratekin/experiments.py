"""Numerical studies: mean-field convergence, Red Queen ceiling, invariance
collapse and the matchmaking phase transition.

Every study cell (grid point x replicate) draws from its own sub-stream of
``StudyConfig.master_seed``, so results do not depend on execution order and
cells can run in a process pool (``workers > 1``).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .control import (
    CostParams,
    PolicySpec,
    Trajectory,
    envelope_value,
    mean_field_trajectory,
    optimal_eta,
)
from .errors import DomainError
from .meanfield import ControlTriple, ModelParams, fixed_point
from .particles import run_trajectory
from .rng import RngStream

log = logging.getLogger(__name__)

PROFILES = {
    "desk": dict(
        n_grid=(100, 1_000, 10_000), horizon=200, replicates=8, fit_min_n=100,
        invariance_n=10_000, invariance_horizon=100,
    ),
    "paper": dict(
        n_grid=(10, 100, 1_000, 10_000, 100_000), horizon=500, replicates=8, fit_min_n=1_000,
        invariance_n=100_000, invariance_horizon=100,
    ),
}


@dataclass
class StudyConfig:
    params: ModelParams = field(default_factory=ModelParams)
    n_grid: tuple[int, ...] = (100, 1_000, 10_000)
    beta2_grid: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    lambda_grid: tuple[float, ...] = (0.95, 0.99, 0.995, 1.0)
    eta_list: tuple[float, ...] = (0.0, 0.5, 0.9)
    horizon: int = 200
    replicates: int = 8
    master_seed: int = 42
    controls: ControlTriple = field(default_factory=lambda: ControlTriple(0.1, 0.0, 1.0))
    fit_min_n: int = 0
    r0: float = 0.0
    invariance_n: int = 10_000
    invariance_gain: float = 1.0
    invariance_r0: float = 0.1
    invariance_horizon: int = 100
    workers: int = 1

    def __post_init__(self):
        for name in ("n_grid", "beta2_grid", "lambda_grid", "eta_list"):
            if len(getattr(self, name)) == 0:
                raise DomainError(f"{name} must not be empty")
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.replicates < 1:
            raise DomainError(f"replicates must be >= 1, got {self.replicates}")

    @classmethod
    def from_profile(cls, profile: str = "desk", **overrides) -> StudyConfig:
        if profile not in PROFILES:
            raise DomainError(f"unknown profile {profile!r}")
        return cls(**{**PROFILES[profile], **overrides})

    def stream(self, *labels) -> RngStream:
        return RngStream(self.master_seed).substream(*labels)

    def echo(self) -> dict:
        return asdict(self)


@dataclass
class ConvergenceResult:
    n_values: list[int]
    l2_errors: list[float]
    fitted_slope: float
    replicates: int
    per_replicate: dict[int, list[float]] = field(default_factory=dict)
    intercept: float = float("nan")
    r_squared: float = float("nan")

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.fitted_slope)

    def std_errors(self) -> list[float]:
        """Standard error of each averaged ``E_N`` across replicates."""
        out = []
        for n in self.n_values:
            e = np.asarray(self.per_replicate[n])
            out.append(float(e.std(ddof=1) / np.sqrt(e.size)) if e.size > 1 else float("nan"))
        return out


def fit_loglog_slope(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log y)``: slope, intercept, R^2."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 3:
        raise DomainError("need at least 3 paired points")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise DomainError("log-log fit needs strictly positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def l2_error(path: np.ndarray, reference: np.ndarray) -> float:
    """Time-averaged L2 distance over t = 1..T (t = 0 is shared by construction)."""
    d = np.asarray(path[1:]) - np.asarray(reference[1:])
    return float(np.sqrt(np.mean(d * d)))


def _map_cells(fn, cells, workers: int):
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _convergence_cell(args):
    n, rep, cfg, ref = args
    policy = PolicySpec("fixed", cfg.controls)
    tr = run_trajectory(n, cfg.horizon, policy, cfg.params, cfg.stream("converge", n, rep), r0=cfg.r0)
    err = l2_error(tr.accuracy, ref)
    log.info("converge n=%d replicate=%d E=%.3g", n, rep, err)
    return n, rep, err


def convergence_study(cfg: StudyConfig) -> ConvergenceResult:
    """Distance between particle and mean-field accuracy paths as N grows.

    Fixed controls ``cfg.controls``; the reference is the exact map iterated
    from the same initial accuracy. The slope is fitted on ``N >= fit_min_n``.
    """
    ref = mean_field_trajectory(PolicySpec("fixed", cfg.controls), cfg.params, cfg.r0, cfg.horizon)
    cells = [(n, rep, cfg, ref.accuracy) for n in cfg.n_grid for rep in range(cfg.replicates)]
    per: dict[int, list[float]] = {n: [0.0] * cfg.replicates for n in cfg.n_grid}
    for n, rep, err in _map_cells(_convergence_cell, cells, cfg.workers):
        per[n][rep] = err
    ns = list(cfg.n_grid)
    errors = [float(np.mean(per[n])) for n in ns]
    fit_n = [n for n in ns if n >= cfg.fit_min_n]
    fit_e = [errors[ns.index(n)] for n in fit_n]
    slope = intercept = r2 = float("nan")
    if len(fit_n) >= 3 and all(e > 0 for e in fit_e):
        slope, intercept, r2 = fit_loglog_slope(fit_n, fit_e)
    return ConvergenceResult(ns, errors, slope, cfg.replicates, per, intercept, r2)


def red_queen_study(cfg: StudyConfig) -> list[tuple[float, float, float]]:
    """``(lam, beta2, r_inf)`` rows; ``lam = 1`` is the static limit with ``r_inf = 1``."""
    rows = []
    for lam in cfg.lambda_grid:
        if not 0.0 < lam <= 1.0:
            raise DomainError(f"lambda grid entries must lie in (0, 1], got {lam}")
        for b2 in cfg.beta2_grid:
            r_inf = 1.0 if lam == 1.0 else fixed_point(ModelParams(lam, b2))
            rows.append((float(lam), float(b2), float(r_inf)))
    return rows


@dataclass
class InvarianceResult:
    trajectories: dict[tuple[str, float], Trajectory]
    spread: dict[str, float]
    spread_path: dict[str, np.ndarray]

    @property
    def ratio(self) -> float:
        return self.spread["adaptive_scale"] / self.spread["fixed_scale"]


def _invariance_cell(args):
    regime, eta, cfg, n, horizon, rep = args
    gain = cfg.invariance_gain
    if regime == "fixed_scale":
        policy = PolicySpec("fixed", ControlTriple(gain, eta, 1.0))
    else:
        policy = PolicySpec("signal_matched", ControlTriple(gain, eta, 1.0))
    # one stream per replicate, shared by every (regime, eta) cell
    stream = cfg.stream("invariance", rep)
    tr = run_trajectory(n, horizon, policy, cfg.params, stream, "mean_field", r0=cfg.invariance_r0)
    log.info("invariance regime=%s eta=%g", regime, eta)
    return regime, eta, tr


def cross_eta_spread(paths: list[np.ndarray]) -> np.ndarray:
    """Per-period ``max_{eta, eta'} |r^eta_t - r^eta'_t|``."""
    stack = np.vstack(paths)
    return stack.max(axis=0) - stack.min(axis=0)


def invariance_study(
    cfg: StudyConfig, n: int | None = None, horizon: int | None = None, replicate: int = 0
) -> InvarianceResult:
    """Fixed scale (sigma = 1) versus signal-matched scale (sigma_t = r_t) across ``eta_list``.

    All cells start from the same exact-moment population and share every
    random stream, so cross-eta differences come from the control alone.
    """
    n = cfg.invariance_n if n is None else n
    horizon = cfg.invariance_horizon if horizon is None else horizon
    cells = [
        (regime, float(eta), cfg, n, horizon, replicate)
        for regime in ("fixed_scale", "adaptive_scale")
        for eta in cfg.eta_list
    ]
    trajs = {(regime, eta): tr for regime, eta, tr in _map_cells(_invariance_cell, cells, cfg.workers)}
    spread_path, spread = {}, {}
    for regime in ("fixed_scale", "adaptive_scale"):
        path = cross_eta_spread([trajs[(regime, float(e))].accuracy for e in cfg.eta_list])
        spread_path[regime] = path
        spread[regime] = float(path.max())
    return InvarianceResult(trajs, spread, spread_path)


def phase_transition_study(kappa_c: float, r_grid) -> list[tuple[float, float, float]]:
    """``(r, eta*, V(r))`` over ``r_grid``."""
    cost = CostParams(kappa_c=kappa_c)
    return [(float(r), optimal_eta(float(r), cost), envelope_value(float(r), cost)) for r in r_grid]
