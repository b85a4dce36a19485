"""Acceptance suite: eleven end-to-end criteria at their stated tolerances.

Each test records a PASS/FAIL verdict (printed in the terminal summary by
``conftest.py``) and then asserts it.
"""
from __future__ import annotations

import itertools
import json
import math
import time

import numpy as np
import pytest

from _oracles import bisect_fixed_point, grid_max_ratio
from conftest import record
from ratekin.cli import main as cli_main
from ratekin.control import CostParams, envelope_value, optimal_eta
from ratekin.experiments import StudyConfig, convergence_study, invariance_study, red_queen_study
from ratekin.meanfield import (
    AccuracyState,
    ControlTriple,
    ModelParams,
    envelope_coefficients,
    fixed_point,
    invariant_phi,
    iterate_phi,
    k_sharp,
    lambda2,
    optimal_gain,
    pre_scaling_variance,
    psi,
    quadratic_coefficients,
    transition_psi,
)
from ratekin.oracle import sample_shadow_step
from ratekin.particles import cycle, init_population, trajectory_streams
from ratekin.rng import RngStream

P = ModelParams(0.99, 1.0)
R_LAT = np.linspace(0.05, 0.95, 5)
S_LAT = np.array([0.2, 0.6, 1.0, 1.4, 2.0])
K_LAT = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
E_LAT = np.linspace(0.0, 0.9, 5)


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


def lambda2_split_cross(r, s, k, eta, beta2):
    """Pre-scaling variance with the cross term split into its K(1-K) and K^2 parts."""
    return (
        s**2 * ((1 - k) ** 2 + k**2 + 2 * k * (1 - k) * eta)
        + k**2 * (beta2 + 2 * (1 - eta * r**2))
        + 2 * k * (1 - k) * (1 - eta) * r * s
        - 2 * k**2 * (1 - eta) * r * s
    )


def test_criterion_01_closed_form_identities():
    t0 = time.perf_counter()
    r, s, k, eta = np.meshgrid(R_LAT, S_LAT, K_LAT, E_LAT, indexing="ij")
    b2 = P.beta2
    direct = lambda2_split_cross(r, s, k, eta, b2)
    parts = lambda2(r, k, eta, s, b2)
    u, v, w = quadratic_coefficients(r, eta, s, b2)
    quad = u + v * k + w * k**2
    err_a = max(rel_err(parts, direct).max(), rel_err(quad, direct).max())
    disc = 4 * u * w - v**2
    disc_ref = 4 * s**2 * (b2 + 2 * (1 - r**2) + (1 - eta**2) * (s - r) ** 2)
    err_b = rel_err(disc, disc_ref).max()
    err_c = 0.0
    for ri, ei in itertools.product(R_LAT, E_LAT):
        c = envelope_coefficients(ri, ei, P)
        err_c = max(err_c, abs(ri * ri * c.c - c.a - (1 - ri * ri) ** 2) / (1 - ri * ri) ** 2)
    elapsed = time.perf_counter() - t0
    ok = err_a <= 1e-12 and err_b <= 1e-12 and err_c <= 1e-12 and elapsed < 1.0
    record(1, "closed-form identities", ok,
           f"max rel err (a) {err_a:.1e}, (b) {err_b:.1e}, (c) {err_c:.1e}; {elapsed:.3f}s")
    assert ok


def test_criterion_02_invariance_exact():
    worst_eta = worst_phi = 0.0
    for r, k, eta in itertools.product(R_LAT, K_LAT, E_LAT):
        worst_eta = max(worst_eta, abs(psi(r, k, eta, r, P) - psi(r, k, 0.0, r, P)))
    for r, eta in itertools.product(R_LAT, E_LAT):
        worst_phi = max(worst_phi, abs(psi(r, optimal_gain(r, P), eta, r, P) - invariant_phi(r, P)))
    ok = worst_eta <= 1e-12 and worst_phi <= 1e-12
    record(2, "invariance at signal-matched scale", ok,
           f"max |Psi(eta)-Psi(0)| {worst_eta:.1e}, max |Psi(K*)-Phi| {worst_phi:.1e}")
    assert ok


def test_criterion_03_envelope_optimality():
    t0 = time.perf_counter()
    g = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        sigma, r, eta = g.uniform(0.2, 2.0), g.uniform(0.05, 0.95), g.uniform(0.0, 0.95)
        k, env = k_sharp(sigma, r, eta, P)
        assert -5.0 <= k <= 5.0
        env_grid, _ = grid_max_ratio(r, eta, sigma, P.beta2)
        worst = max(worst, abs(env - env_grid))
    sig_grid = np.arange(0.001, 3.0, 1e-3)
    worst_peak = 0.0
    for r, eta in itertools.product([0.1, 0.35, 0.6, 0.85], [0.0, 0.5, 0.9]):
        env_sigma = np.array([k_sharp(s, r, eta, P)[1] for s in sig_grid])
        worst_peak = max(worst_peak, abs(sig_grid[np.argmax(env_sigma)] - r))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and worst_peak <= 1e-3 + 1e-12 and elapsed < 10.0
    record(3, "envelope optimality", ok,
           f"max |env - grid| {worst:.1e}, max |argmax sigma - r| {worst_peak:.1e}; {elapsed:.2f}s")
    assert ok


def test_criterion_04_fixed_point():
    r_inf = fixed_point(P)
    oracle = bisect_fixed_point(P.lam, P.beta2)
    up = iterate_phi(0.0, 500, P)
    down = iterate_phi(0.99, 500, P)
    mono = bool(np.all(np.diff(up) >= 0) and np.all(np.diff(down) <= 0))
    conv = max(abs(up[-1] - r_inf), abs(down[-1] - r_inf))
    resid = abs(invariant_phi(r_inf, P) - r_inf)
    ok = abs(r_inf - oracle) <= 1e-12 and r_inf < P.lam and resid <= 1e-10 and mono and conv <= 1e-10
    record(4, "fixed point", ok,
           f"r_inf={r_inf:.13f}, |r - bisection| {abs(r_inf - oracle):.1e}, "
           f"|Phi(r)-r| {resid:.1e}, monotone={mono}, |r_500 - r_inf| {conv:.1e}")
    assert ok


def test_criterion_05_monte_carlo_oracle():
    t0 = time.perf_counter()
    lattice = list(itertools.product([0.2, 0.5, 0.8], [0.2, 0.85, 1.5], [0.05, 0.225, 0.4], [0.0, 0.45, 0.9]))
    passed = 0
    for i, (r, sigma, k, eta) in enumerate(lattice):
        st, c = AccuracyState(r, sigma), ControlTriple(k, eta, sigma)
        est = sample_shadow_step(st, c, P, 1_000_000, RngStream(5, i))
        vb = pre_scaling_variance(st, c, P)
        checks = [
            est.psi.within(transition_psi(st, c, P)),
            est.var_rating.within(vb.var_rating),
            est.var_skill_mismatch.within(vb.var_skill_mismatch),
            est.var_outcome_noise.within(vb.var_outcome_noise),
            est.cross_cov.within(vb.cross_cov),
        ]
        passed += all(checks)
    elapsed = time.perf_counter() - t0
    frac = passed / len(lattice)
    ok = frac >= 0.95 and elapsed < 60.0
    record(5, "Monte Carlo oracle agreement", ok,
           f"{passed}/{len(lattice)} lattice points within 3 SE ({frac:.1%}); {elapsed:.1f}s")
    assert ok


def test_criterion_06_one_step_particles():
    t0 = time.perf_counter()
    n = 100_000
    control = ControlTriple(0.1, 0.0, 1.0)
    target = transition_psi(AccuracyState(0.4, 1.0), control, P)
    hits = 0
    for seed in range(20):
        stream = RngStream(seed)
        pop = init_population(n, 0.4, trajectory_streams(stream)["init"])
        cycle(pop, control, P, trajectory_streams(stream))
        x = pop.pre_scaled - pop.pre_scaled.mean()
        s = pop.skills - pop.skills.mean()
        r_next = x @ s / math.sqrt((x @ x) * (s @ s))
        hits += abs(r_next - target) <= 3 / math.sqrt(n)
    elapsed = time.perf_counter() - t0
    ok = hits >= 17 and elapsed < 30.0
    record(6, "one-step particle agreement", ok, f"{hits}/20 seeds within 3/sqrt(N); {elapsed:.1f}s")
    assert ok


def test_criterion_07_convergence_scaling():
    t0 = time.perf_counter()
    cfg = StudyConfig.from_profile("desk", params=P, controls=ControlTriple(0.1, 0.0, 1.0))
    assert cfg.n_grid == (100, 1_000, 10_000) and cfg.horizon == 200 and cfg.replicates == 8
    res = convergence_study(cfg)
    elapsed = time.perf_counter() - t0
    ok = -0.65 <= res.fitted_slope <= -0.35 and elapsed < 300.0
    errs = ", ".join(f"{e:.2e}" for e in res.l2_errors)
    record(7, "convergence scaling", ok,
           f"slope {res.fitted_slope:.3f} (R^2 {res.r_squared:.3f}), E_N = [{errs}]; {elapsed:.1f}s")
    assert ok


def test_criterion_08_red_queen():
    t0 = time.perf_counter()
    rows = red_queen_study(StudyConfig(lambda_grid=(0.95, 0.99, 1.0), beta2_grid=(0.25, 1.0, 4.0)))
    ok = True
    for lam in (0.95, 0.99):
        vals = [r for l, _, r in rows if l == lam]
        ok &= all(v < lam for v in vals) and all(a > b for a, b in zip(vals, vals[1:]))
    ok &= all(r == 1.0 for l, _, r in rows if l == 1.0)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    table = "; ".join(f"({l:g},{b:g})->{r:.4f}" for l, b, r in rows if l < 1.0)
    record(8, "Red Queen ceiling", ok, f"{table}; {elapsed:.3f}s")
    assert ok


def test_criterion_09_data_collapse():
    t0 = time.perf_counter()
    cfg = StudyConfig.from_profile("desk", params=P)
    assert cfg.invariance_n == 10_000 and cfg.invariance_horizon == 100 and cfg.invariance_r0 == 0.1
    res = invariance_study(cfg)
    elapsed = time.perf_counter() - t0
    ok = res.ratio <= 0.25 and res.spread["fixed_scale"] > 0.05 and elapsed < 120.0
    record(9, "invariance data collapse", ok,
           f"spread fixed {res.spread['fixed_scale']:.4f}, adaptive {res.spread['adaptive_scale']:.4f}, "
           f"ratio {res.ratio:.3f}; {elapsed:.1f}s")
    assert ok


def test_criterion_10_phase_transition():
    t0 = time.perf_counter()
    cost = CostParams(0.04)
    grid = np.round(np.arange(101) * 0.01, 12)
    etas = np.array([optimal_eta(r, cost) for r in grid])
    below = bool(np.all(etas[grid <= 0.2] == 0.0))
    exact = optimal_eta(0.5, cost) == 0.6 and envelope_value(0.5, cost) == 0.09
    # continuity at r_c: the first step past the threshold moves eta* by at most slope * step
    i = int(np.searchsorted(grid, 0.2))
    jump = etas[i + 1] - etas[i]
    cont = jump <= 0.01 / 0.2 and optimal_eta(0.2 + 1e-6, cost) < 1e-5
    elapsed = time.perf_counter() - t0
    ok = below and exact and cont and elapsed < 1.0
    record(10, "matchmaking phase transition", ok,
           f"eta*=0 for r<=0.2: {below}, eta*(0.5)=0.6 and V(0.5)=0.09 exactly: {exact}, "
           f"first step past r_c {jump:.4f}; {elapsed:.3f}s")
    assert ok


STUDIES = [
    ["simulate", "--n", "1000", "--horizon", "50", "--seed", "123"],
    ["converge", "--profile", "desk", "--seed", "123"],
    ["red-queen"],
    ["invariance", "--profile", "desk", "--seed", "123"],
    ["phase", "--kappa-c", "0.04"],
]




def test_criterion_11_determinism(tmp_path):
    mismatches = []
    files = 0
    for args in STUDIES:
        first, second = tmp_path / f"{args[0]}-1", tmp_path / f"{args[0]}-2"
        assert cli_main([*args, "--out", str(first)]) == 0
        assert cli_main([args[0], "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
        outputs = json.loads((first / "manifest.json").read_text())["outputs"]
        for name in outputs:
            files += 1
            if (first / name).read_bytes() != (second / name).read_bytes():
                mismatches.append(f"{args[0]}:{name}")
    ok = not mismatches and files == len(STUDIES)
    record(11, "determinism from manifest", ok,
           f"{files} CSVs rerun from manifest, mismatches: {mismatches or 'none'}")
    assert ok
