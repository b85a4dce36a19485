"""Command-line front end.

Subcommands: ``fixed-point``, ``simulate``, ``converge``, ``red-queen``,
``invariance``, ``phase``. Settings come from built-in defaults, then an
optional ``--config`` file, then explicit flags. The config file is either a
flat ``key = value`` text file or a ``manifest.json`` written by an earlier
run, whose echoed config reproduces that run.

Exit codes: 0 success, 2 invalid flags or config, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .control import CostParams, PolicySpec
from .errors import RatekinError
from .experiments import (
    PROFILES,
    StudyConfig,
    convergence_study,
    invariance_study,
    phase_transition_study,
    red_queen_study,
)
from .meanfield import ControlTriple, ModelParams, fixed_point
from .particles import run_trajectory
from .rng import RngStream, resolve_seed

log = logging.getLogger("ratekin")


class UsageError(Exception):
    """Invalid user input; reported on stderr with exit code 2."""


# key -> (type, default). ``None`` defaults are filled per profile or command.
SETTINGS = {
    "lambda": (float, 0.99),
    "beta2": (float, 1.0),
    "n": (int, None),
    "horizon": (int, None),
    "seed": (int, None),
    "profile": (str, "desk"),
    "kappa_c": (float, 0.04),
    "discount": (float, 0.95),
    "scale_source": (str, "mean-field"),
    "policy": (str, "optimal"),
    "gain": (float, None),
    "eta": (float, 0.0),
    "sigma": (float, 1.0),
    "r0": (float, None),
    "start": (str, "exact"),
    "replicates": (int, None),
    "n_grid": (str, None),
    "beta2_grid": (str, "0.25,0.5,1,2,4"),
    "lambda_grid": (str, "0.95,0.99,0.995,1"),
    "eta_list": (str, "0,0.5,0.9"),
    "r_step": (float, 0.01),
    "workers": (int, 1),
}

COMMAND_KEYS = {
    "fixed-point": ("lambda", "beta2"),
    "simulate": ("lambda", "beta2", "n", "horizon", "seed", "kappa_c", "discount", "scale_source",
                 "policy", "gain", "eta", "sigma", "r0", "start"),
    "converge": ("lambda", "beta2", "n_grid", "horizon", "seed", "profile", "replicates", "gain",
                 "eta", "sigma", "workers"),
    "red-queen": ("lambda_grid", "beta2_grid"),
    "invariance": ("lambda", "beta2", "n", "horizon", "seed", "profile", "eta_list", "gain", "r0",
                   "workers"),
    "phase": ("kappa_c", "r_step"),
}


def fmt(x) -> str:
    """12 significant digits, always with a decimal point or exponent."""
    s = format(float(x), ".12g")
    if not any(c in s for c in ".eni"):
        s += ".0"
    return s


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _read_config(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from exc
    if p.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config: invalid JSON in {path}: {exc}") from exc
        cfg = data.get("config", data)
        return {k.replace("-", "_"): v for k, v in cfg.items()}
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[ratekin]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"--config: cannot parse {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in parser["ratekin"].items()}


def resolve(command: str, ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags for ``command`` and type-check them."""
    raw: dict = {}
    if getattr(ns, "config", None):
        raw.update(_read_config(ns.config))
    for key in SETTINGS:
        value = getattr(ns, key, None)
        if value is not None:
            raw[key] = value
    unknown = set(raw) - set(SETTINGS)
    if unknown:
        raise UsageError(f"--config: unknown key(s) {', '.join(sorted(unknown))}")
    out = {}
    for key in COMMAND_KEYS[command]:
        typ, default = SETTINGS[key]
        value = raw.get(key, default)
        if value is not None:
            try:
                value = typ(value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{_flag(key)}: expected {typ.__name__}, got {value!r}") from exc
        out[key] = value
    if "seed" in out:
        try:
            out["seed"] = resolve_seed(out["seed"])
        except RatekinError as exc:
            raise UsageError(str(exc)) from exc
        if not 0 <= out["seed"] < 2**64:
            raise UsageError(f"--seed must be an unsigned 64-bit integer, got {out['seed']}")
    if "profile" in out and out["profile"] not in PROFILES:
        raise UsageError(f"--profile must be one of {sorted(PROFILES)}, got {out['profile']!r}")
    return out


def _floats(key: str, text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"{_flag(key)}: expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise UsageError(f"{_flag(key)}: empty list")
    return values


def _params(cfg: dict, allow_static: bool = False) -> ModelParams:
    lam, b2 = cfg["lambda"], cfg["beta2"]
    upper_ok = lam <= 1.0 if allow_static else lam < 1.0
    if not (0.0 < lam and upper_ok):
        bound = "(0, 1]" if allow_static else "(0, 1)"
        raise UsageError(f"--lambda must lie in {bound}, got {lam}")
    if not b2 > 0.0:
        raise UsageError(f"--beta2 must be positive, got {b2}")
    return ModelParams(lam, b2)


def _check_positive_int(cfg: dict, key: str, minimum: int = 1):
    if cfg[key] is not None and cfg[key] < minimum:
        raise UsageError(f"{_flag(key)} must be >= {minimum}, got {cfg[key]}")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_outputs(out: Path, command: str, cfg: dict, tables: dict, results: dict, started: str):
    out.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, (header, rows) in tables.items():
        _write_csv(out / name, header, rows)
        digests[name] = _digest(out / name)
    manifest = {
        "tool": "ratekin",
        "version": __version__,
        "command": command,
        "config": cfg,
        "master_seed": cfg.get("seed"),
        "backend": _kernels.BACKEND,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": digests,
        "results": results,
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands

def cmd_fixed_point(cfg: dict, out: Path | None) -> tuple[dict, dict]:
    params = _params(cfg, allow_static=True)
    r_inf = 1.0 if params.lam == 1.0 else fixed_point(params)
    print(fmt(r_inf))
    return {}, {"r_infinity": r_inf}


def _policy(cfg: dict) -> PolicySpec:
    cost = CostParams(cfg["kappa_c"], cfg["discount"])
    mode = cfg["policy"].replace("-", "_")
    if mode == "optimal":
        mode = "optimal_separated"
    if mode not in ("fixed", "optimal_separated", "signal_matched"):
        raise UsageError(f"--policy must be fixed, optimal or signal-matched, got {cfg['policy']!r}")
    if mode == "optimal_separated":
        return PolicySpec(mode, None, cost)
    gain = 0.1 if cfg["gain"] is None else cfg["gain"]
    if not gain > 0.0:
        raise UsageError(f"--gain must be positive, got {gain}")
    if not 0.0 <= cfg["eta"] < 1.0:
        raise UsageError(f"--eta must lie in [0, 1), got {cfg['eta']}")
    if not cfg["sigma"] > 0.0:
        raise UsageError(f"--sigma must be positive, got {cfg['sigma']}")
    return PolicySpec(mode, ControlTriple(gain, cfg["eta"], cfg["sigma"]), cost)


def cmd_simulate(cfg: dict, out: Path) -> tuple[dict, dict]:
    cfg["n"] = 1000 if cfg["n"] is None else cfg["n"]
    cfg["horizon"] = 100 if cfg["horizon"] is None else cfg["horizon"]
    cfg["r0"] = 0.0 if cfg["r0"] is None else cfg["r0"]
    if cfg["n"] < 4 or cfg["n"] % 2:
        raise UsageError(f"--n must be even and >= 4, got {cfg['n']}")
    _check_positive_int(cfg, "horizon", 0)
    if not 0.0 <= cfg["r0"] < 1.0:
        raise UsageError(f"--r0 must lie in [0, 1), got {cfg['r0']}")
    if cfg["scale_source"] not in ("mean-field", "empirical"):
        raise UsageError(f"--scale-source must be mean-field or empirical, got {cfg['scale_source']!r}")
    if cfg["start"] not in ("exact", "zero"):
        raise UsageError(f"--start must be exact or zero, got {cfg['start']!r}")
    try:
        cost = CostParams(cfg["kappa_c"], cfg["discount"])
    except RatekinError as exc:
        raise UsageError(f"--kappa-c/--discount: {exc}") from exc
    params = _params(cfg)
    policy = _policy(cfg)
    tr = run_trajectory(
        cfg["n"], cfg["horizon"], policy, params, RngStream(cfg["seed"]),
        cfg["scale_source"].replace("-", "_"), r0=cfg["r0"], start=cfg["start"],
    )
    rows = [
        [t, fmt(tr.accuracy[t]), fmt(tr.dispersion[t]), fmt(c.gain), fmt(c.assortativity),
         fmt(c.scale), fmt(tr.utility[t])]
        for t, c in enumerate(tr.controls)
    ]
    from .control import discounted_welfare

    welfare = discounted_welfare(tr.utility, cost.discount)
    header = ["t", "r_empirical", "sigma", "K", "eta", "sigma_target", "utility"]
    return {"trajectory.csv": (header, rows)}, {"discounted_welfare": welfare}


def _study_config(cfg: dict, **extra) -> StudyConfig:
    overrides = {"params": _params(cfg), "master_seed": cfg["seed"], "workers": cfg["workers"]}
    overrides.update(extra)
    try:
        return StudyConfig.from_profile(cfg["profile"], **overrides)
    except RatekinError as exc:
        raise UsageError(str(exc)) from exc


def cmd_converge(cfg: dict, out: Path) -> tuple[dict, dict]:
    profile = PROFILES[cfg["profile"]]
    extra = {}
    if cfg["n_grid"] is not None:
        grid = tuple(int(x) for x in _floats("n_grid", cfg["n_grid"]))
        if any(n < 4 or n % 2 for n in grid):
            raise UsageError(f"--n-grid entries must be even and >= 4, got {cfg['n_grid']}")
        extra["n_grid"] = grid
        extra["fit_min_n"] = min(grid)
    for key in ("horizon", "replicates"):
        _check_positive_int(cfg, key)
        if cfg[key] is not None:
            extra[key] = cfg[key]
    gain = 0.1 if cfg["gain"] is None else cfg["gain"]
    try:
        extra["controls"] = ControlTriple(gain, cfg["eta"], cfg["sigma"])
    except RatekinError as exc:
        raise UsageError(f"--gain/--eta/--sigma: {exc}") from exc
    study = _study_config(cfg, **extra)
    res = convergence_study(study)
    rows = [
        [n, rep, fmt(res.per_replicate[n][rep])]
        for n in res.n_values
        for rep in range(res.replicates)
    ]
    results = {
        "slope": res.fitted_slope if not res.degenerate else None,
        "intercept": res.intercept if not res.degenerate else None,
        "r_squared": res.r_squared if not res.degenerate else None,
        "mean_l2_error": dict(zip(map(str, res.n_values), res.l2_errors)),
        "profile_defaults": {k: v for k, v in profile.items()},
    }
    return {"converge.csv": (["n", "replicate", "l2_error"], rows)}, results


def cmd_red_queen(cfg: dict, out: Path) -> tuple[dict, dict]:
    lams = _floats("lambda_grid", cfg["lambda_grid"])
    b2s = _floats("beta2_grid", cfg["beta2_grid"])
    if any(not 0.0 < x <= 1.0 for x in lams):
        raise UsageError(f"--lambda-grid entries must lie in (0, 1], got {cfg['lambda_grid']}")
    if any(not x > 0.0 for x in b2s):
        raise UsageError(f"--beta2-grid entries must be positive, got {cfg['beta2_grid']}")
    study = StudyConfig(lambda_grid=lams, beta2_grid=b2s)
    rows = [[fmt(l), fmt(b), fmt(r)] for l, b, r in red_queen_study(study)]
    return {"red_queen.csv": (["lambda", "beta2", "r_infinity"], rows)}, {}


def cmd_invariance(cfg: dict, out: Path) -> tuple[dict, dict]:
    extra = {"eta_list": _floats("eta_list", cfg["eta_list"])}
    if any(not 0.0 <= e < 1.0 for e in extra["eta_list"]):
        raise UsageError(f"--eta-list entries must lie in [0, 1), got {cfg['eta_list']}")
    if cfg["n"] is not None:
        if cfg["n"] < 4 or cfg["n"] % 2:
            raise UsageError(f"--n must be even and >= 4, got {cfg['n']}")
        extra["invariance_n"] = cfg["n"]
    if cfg["horizon"] is not None:
        _check_positive_int(cfg, "horizon")
        extra["invariance_horizon"] = cfg["horizon"]
    if cfg["gain"] is not None:
        if not cfg["gain"] > 0.0:
            raise UsageError(f"--gain must be positive, got {cfg['gain']}")
        extra["invariance_gain"] = cfg["gain"]
    if cfg["r0"] is not None:
        if not 0.0 <= cfg["r0"] < 1.0:
            raise UsageError(f"--r0 must lie in [0, 1), got {cfg['r0']}")
        extra["invariance_r0"] = cfg["r0"]
    study = _study_config(cfg, **extra)
    res = invariance_study(study)
    rows = []
    for regime in ("fixed_scale", "adaptive_scale"):
        for eta in study.eta_list:
            acc = res.trajectories[(regime, float(eta))].accuracy
            rows.extend([regime, fmt(eta), t, fmt(r)] for t, r in enumerate(acc))
    results = {
        "spread": res.spread,
        "ratio": res.ratio,
        "n": study.invariance_n,
        "horizon": study.invariance_horizon,
        "gain": study.invariance_gain,
        "r0": study.invariance_r0,
        "scale_source": "mean-field",
    }
    return {"invariance.csv": (["regime", "eta", "t", "r"], rows)}, results


def cmd_phase(cfg: dict, out: Path) -> tuple[dict, dict]:
    step = cfg["r_step"]
    if not 0.0 < step <= 1.0:
        raise UsageError(f"--r-step must lie in (0, 1], got {step}")
    if not cfg["kappa_c"] > 0.0:
        raise UsageError(f"--kappa-c must be positive, got {cfg['kappa_c']}")
    count = int(round(1.0 / step))
    grid = np.unique(np.clip(np.round(np.arange(count + 1) * step, 12), 0.0, 1.0))
    rows = [[fmt(r), fmt(e), fmt(v)] for r, e, v in phase_transition_study(cfg["kappa_c"], grid)]
    return {"phase.csv": (["r", "eta_star", "value"], rows)}, {"r_critical": cfg["kappa_c"] ** 0.5}


COMMANDS = {
    "fixed-point": cmd_fixed_point,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "red-queen": cmd_red_queen,
    "invariance": cmd_invariance,
    "phase": cmd_phase,
}

HELP = {
    "fixed-point": "print the long-run accuracy under optimal filtering",
    "simulate": "simulate one particle trajectory",
    "converge": "particle vs mean-field convergence study",
    "red-queen": "equilibrium accuracy over (lambda, beta2) grids",
    "invariance": "fixed vs signal-matched scale across matching intensities",
    "phase": "optimal matching intensity and value over an accuracy grid",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratekin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ratekin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMAND_KEYS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", metavar="PATH", help="key = value file or manifest.json")
        if name != "fixed-point":
            p.add_argument("--out", metavar="DIR", default=".", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true", help="status line per study cell")
        for key in keys:
            typ, _ = SETTINGS[key]
            kwargs = {"dest": key, "default": None, "type": str if typ is str else typ}
            if key == "profile":
                kwargs["choices"] = sorted(PROFILES)
            if key == "scale_source":
                kwargs["choices"] = ["mean-field", "empirical"]
            p.add_argument(_flag(key), **kwargs)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    started = datetime.now(timezone.utc).isoformat()
    try:
        cfg = resolve(ns.command, ns)
        out = Path(ns.out) if ns.command != "fixed-point" else None
        tables, results = COMMANDS[ns.command](cfg, out)
        if out is not None:
            _write_outputs(out, ns.command, cfg, tables, results, started)
    except UsageError as exc:
        print(f"ratekin {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except RatekinError as exc:
        print(f"ratekin {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ratekin {ns.command}: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
