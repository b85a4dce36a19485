"""Hot numeric kernels with a numba path and a pure-numpy path.

The backend is picked once at import time:

* ``RATEKIN_NUMBA=0`` (or ``off``/``false``) forces the numpy path;
* ``RATEKIN_NUMBA=1`` requires numba and fails loudly without it;
* unset: numba when importable, numpy otherwise.

Both implementations stay importable as :data:`numpy_impl` and
:data:`numba_impl` (the latter is ``None`` without numba) so tests and the
benchmark can compare them directly. Random draws are never made inside a
kernel; callers pass pre-drawn arrays, which keeps both paths on the same
random stream.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

# Layout of the accumulator returned by ``shadow_sums``.
SHADOW_FIELDS = (
    "xt2", "xt4",            # pre-scaled rating X~
    "a2", "a4",              # retention term A
    "brho2", "brho4",        # skill mismatch B_rho
    "bom2", "bom4",          # outcome noise B_omega
    "cross", "cross2",       # 2 A B_rho
    "num", "num2",           # rho * X~
    "x2", "xy", "x2y2", "x3y", "xy3", "x4",  # x = rho_next, y = X~
)
N_SHADOW = len(SHADOW_FIELDS)


def _pair_update_np(ratings, skills, first, second, omega, gain, out):
    xi = ratings[first]
    xj = ratings[second]
    outcome = skills[first] - skills[second] + omega
    delta = gain * (outcome - (xi - xj))
    out[first] = xi + delta
    out[second] = xj - delta


def _moments2_np(x, y):
    mx = x.mean()
    my = y.mean()
    dx = x - mx
    dy = y - my
    return mx, my, np.dot(dx, dx) / x.size, np.dot(dy, dy) / y.size, np.dot(dx, dy) / x.size


def _shadow_terms(rho, e1, e2, zeta, eps, xi, r, sigma, gain, eta, beta, lam):
    sr = np.sqrt(1.0 - r * r)
    se = np.sqrt(1.0 - eta * eta)
    x = sigma * (r * rho + sr * e1)
    x_op = eta * x + se * sigma * e2
    rho_op = (r / sigma) * x_op + sr * zeta
    a = (1.0 - gain) * x + gain * x_op
    b_rho = gain * (rho - rho_op)
    b_om = gain * beta * eps
    xt = a + b_rho + b_om
    rho_next = lam * rho + np.sqrt(1.0 - lam * lam) * xi
    return x, x_op, rho_op, a, b_rho, b_om, xt, rho_next


def _shadow_sums_np(rho, e1, e2, zeta, eps, xi, r, sigma, gain, eta, beta, lam):
    _, _, _, a, b_rho, b_om, xt, rn = _shadow_terms(
        rho, e1, e2, zeta, eps, xi, r, sigma, gain, eta, beta, lam
    )
    xt2 = xt * xt
    a2 = a * a
    br2 = b_rho * b_rho
    bo2 = b_om * b_om
    cross = 2.0 * a * b_rho
    num = rho * xt
    x2 = rn * rn
    xy = rn * xt
    return np.array([
        xt2.sum(), (xt2 * xt2).sum(),
        a2.sum(), (a2 * a2).sum(),
        br2.sum(), (br2 * br2).sum(),
        bo2.sum(), (bo2 * bo2).sum(),
        cross.sum(), (cross * cross).sum(),
        num.sum(), (num * num).sum(),
        x2.sum(), xy.sum(), (xy * xy).sum(), (x2 * xy).sum(), (xy * xt2).sum(), (x2 * x2).sum(),
    ])


numpy_impl = SimpleNamespace(
    name="numpy",
    pair_update=_pair_update_np,
    moments2=_moments2_np,
    shadow_sums=_shadow_sums_np,
)


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def pair_update(ratings, skills, first, second, omega, gain, out):
        for k in range(first.shape[0]):
            i = first[k]
            j = second[k]
            xi = ratings[i]
            xj = ratings[j]
            delta = gain * ((skills[i] - skills[j] + omega[k]) - (xi - xj))
            out[i] = xi + delta
            out[j] = xj - delta

    @njit(cache=True)
    def moments2(x, y):
        n = x.shape[0]
        sx = 0.0
        sy = 0.0
        for i in range(n):
            sx += x[i]
            sy += y[i]
        mx = sx / n
        my = sy / n
        vxx = 0.0
        vyy = 0.0
        vxy = 0.0
        for i in range(n):
            dx = x[i] - mx
            dy = y[i] - my
            vxx += dx * dx
            vyy += dy * dy
            vxy += dx * dy
        return mx, my, vxx / n, vyy / n, vxy / n

    @njit(cache=True)
    def shadow_sums(rho, e1, e2, zeta, eps, xi, r, sigma, gain, eta, beta, lam):
        acc = np.zeros(18)
        sr = np.sqrt(1.0 - r * r)
        se = np.sqrt(1.0 - eta * eta)
        sl = np.sqrt(1.0 - lam * lam)
        for i in range(rho.shape[0]):
            x = sigma * (r * rho[i] + sr * e1[i])
            x_op = eta * x + se * sigma * e2[i]
            rho_op = (r / sigma) * x_op + sr * zeta[i]
            a = (1.0 - gain) * x + gain * x_op
            b_rho = gain * (rho[i] - rho_op)
            b_om = gain * beta * eps[i]
            xt = a + b_rho + b_om
            rn = lam * rho[i] + sl * xi[i]
            xt2 = xt * xt
            a2 = a * a
            br2 = b_rho * b_rho
            bo2 = b_om * b_om
            cross = 2.0 * a * b_rho
            num = rho[i] * xt
            x2 = rn * rn
            xy = rn * xt
            acc[0] += xt2
            acc[1] += xt2 * xt2
            acc[2] += a2
            acc[3] += a2 * a2
            acc[4] += br2
            acc[5] += br2 * br2
            acc[6] += bo2
            acc[7] += bo2 * bo2
            acc[8] += cross
            acc[9] += cross * cross
            acc[10] += num
            acc[11] += num * num
            acc[12] += x2
            acc[13] += xy
            acc[14] += xy * xy
            acc[15] += x2 * xy
            acc[16] += xy * xt2
            acc[17] += x2 * x2
        return acc

    return SimpleNamespace(
        name="numba",
        pair_update=pair_update,
        moments2=moments2,
        shadow_sums=shadow_sums,
    )


try:
    numba_impl = _build_numba()
except ImportError:
    numba_impl = None


def _select():
    flag = os.environ.get("RATEKIN_NUMBA", "").strip().lower()
    if flag in ("0", "off", "false", "no"):
        return numpy_impl
    if flag in ("1", "on", "true", "yes") and numba_impl is None:
        raise ImportError("RATEKIN_NUMBA=1 but numba is not importable")
    return numba_impl if numba_impl is not None else numpy_impl


active = _select()
BACKEND = active.name

pair_update = active.pair_update
moments2 = active.moments2
shadow_sums = active.shadow_sums
