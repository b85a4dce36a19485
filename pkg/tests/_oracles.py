"""Independent reference computations used by several test modules.

Nothing here imports the closed forms under test: fixed points come from
plain bisection on the squared fixed-point equation, optima from dense grid
search over the raw ratio N**2 / Lambda2 written out term by term.
"""
from __future__ import annotations

import numpy as np

# Frozen outputs of ``bisect_fixed_point`` (tolerance 1e-15 in x = r^2).
R_INF_099_1 = 0.9220734914944525
R_INF_095_4 = 0.6972373403446941


def bisect(f, lo: float, hi: float, tol: float = 1e-15, max_iter: int = 400) -> float:
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ValueError("root not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_point_h(x: float, lam: float, beta2: float) -> float:
    """Squared fixed-point equation in x = r^2, cleared of denominators."""
    w = beta2 + 2.0 * (1.0 - x)
    return lam * lam * (x * w + (1.0 - x) ** 2) - x * w


def bisect_fixed_point(lam: float, beta2: float) -> float:
    x = bisect(lambda v: fixed_point_h(v, lam, beta2), 0.0, lam * lam)
    return float(np.sqrt(x))


def raw_psi(r, k, eta, sigma, lam, beta2):
    """Accuracy map from the covariance and the four-term variance, written out directly."""
    num = r * sigma * (1 - k * (1 - eta)) + k * (1 - eta * r * r)
    var = (
        sigma**2 * ((1 - k) ** 2 + k**2 + 2 * k * (1 - k) * eta)
        + 2 * k**2 * (1 - eta * r * r)
        + k**2 * beta2
        + 2 * k * (1 - eta) * r * sigma * (1 - 2 * k)
    )
    return lam * num / np.sqrt(var)


def grid_max_ratio(r, eta, sigma, beta2, lo=-5.0, hi=5.0, step=1e-4):
    """Max over a K grid of N^2 / Lambda2, plus the arg-max."""
    k = np.arange(lo, hi + step / 2, step)
    ratio = raw_psi(r, k, eta, sigma, 1.0, beta2) ** 2
    i = int(np.argmax(ratio))
    return float(ratio[i]), float(k[i])
