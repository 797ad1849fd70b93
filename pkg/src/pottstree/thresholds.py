"""Critical temperatures for the binary-tree Potts model.

Besides the closed-form thresholds this module hosts the polynomial and
algebraic functions whose sign changes delimit the extremality regions of
the boundary-law branches.  All of them are stated for ``k = 2``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from ._roots import find_root, roots_on_grid
from .errors import DomainError
from .model import PottsParams, fold_theta, theta_c as _theta_c

SQRT2 = math.sqrt(2.0)


def _disc(theta, q, m):
    d = (np.asarray(theta, dtype=float) - 1.0) ** 2 - 4.0 * m * (q - m)
    # roundoff at the fold must not produce NaN
    return np.where((d < 0) & (d >= -1e-12), 0.0, d)


def s_poly(theta, q):
    """Quartic whose root above ``q+1`` bounds the m=1 lower-branch window."""
    t = np.asarray(theta, dtype=float)
    return (6 * t**4 - (2 * q + 3) * t**3 - (4 * q**2 + 7 * q + 3) * t**2
            - (8 * q**2 - 8 * q - 11) * t - (4 * q**2 - 13 * q + 11))


def psi1(theta, q):
    """Positive exactly where MSW certifies the m=1 lower branch on ``[theta_1, q+1]``."""
    t = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(_disc(t, q, 1))
    return (t - 1) * (t * t - t + 6 - 4 * q) - (t * t - t + 4 - 2 * q) * root


def u_poly(theta, q):
    """Cubic that stays positive on ``[theta_1, q+1]``."""
    t = np.asarray(theta, dtype=float)
    return t**3 - (q - 1) * t**2 - (2 * q - 3) * t + (4 * q**2 - 13 * q + 11)


def big_theta(theta, q):
    """Function whose positivity gives extremality of the m=2 lower branch past ``q+1``."""
    t = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(_disc(t, q, 2))
    return (t**4 - t**3 - (6 * q - 5) * t**2 - (4 * q - 17) * t + 2 * q - 6
            - (t**3 - (2 * q + 3) * t - 2 * q + 6) * root)


def branch_inequality_lhs(theta, q, m, upper: bool):
    """``theta**2 - (2m+4) theta - 2m + 3 -/+ (theta-3) sqrt(D)``.

    Negative values mean the MSW bound with ``gamma <= (theta-1)/(theta+1)``
    certifies extremality of the lower (``upper=False``) or upper
    (``upper=True``) branch while its boundary law is at least 1.
    """
    t = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(_disc(t, q, m))
    sign = 1.0 if upper else -1.0
    return t**2 - (2 * m + 4) * t - 2 * m + 3 + sign * (t - 3) * root


def fuzzy_cubic(theta, q, m):
    """Cubic whose roots bound the window where the fuzzy KS test fires on ``Z1``."""
    s = np.asarray(theta, dtype=float) - 1.0
    return (s**3 - (SQRT2 - 1) * q * s**2 - 2 * (2 * SQRT2 - 1) * m * (q - m) * s
            + 2 * q * m * (q - m))


def eta1(theta, q, m):
    """``sqrt(2) |lambda_2| - 1`` for the fuzzy chain of the lower branch."""
    t = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        x1 = 2.0 * (q - m) / (t - 1.0 + np.sqrt(_disc(t, q, m)))
    z1 = x1**2
    return SQRT2 * (t - 1.0 - (x1 - 1.0) * m) * z1 / ((t + m - 1) * z1 + q - m) - 1.0


def eta1_max(q: int, m: int) -> tuple:
    """Maximum of :func:`eta1` over ``[theta_m, q+1]`` as ``(theta, value)``.

    A positive maximum means the fuzzy KS window is non-empty; scanning
    this over ``q`` recovers the smallest ``q`` for which that happens.
    """
    lo, hi = fold_theta(q, 2, m), q + 1.0
    grid = np.linspace(lo, hi, 2001)
    vals = eta1(grid, q, m)
    i = int(np.nanargmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda t: -float(eta1(t, q, m)), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12})
    best = (float(res.x), float(-res.fun))
    return best if best[1] >= vals[i] else (float(grid[i]), float(vals[i]))


def fold_extremality_bound(m: int) -> float:
    """Largest ``q`` (exclusive) for which the fold law of block ``m >= 2`` is extreme."""
    return (m + 1) / (2 * m) * (3 * m + 1 + math.sqrt(m * m + 6 * m + 1))


def psi2_shortcut(q: int) -> float:
    """``(1 + sqrt(16 q - 23)) / 2``; lies below ``theta_1`` for every ``q >= 2``."""
    return (1.0 + math.sqrt(16 * q - 23)) / 2.0


def free_msw_threshold(q: int, k: int) -> float:
    """``theta`` solving ``k kappa gamma = 1`` for the free chain.

    With ``kappa = (theta-1)/(theta+q-1)`` and
    ``gamma <= (theta-1)/(theta+1)`` this is the positive root of
    ``(k-1) t**2 - (2k+q) t + (k+1-q) = 0``.
    """
    a, b, c = k - 1.0, -(2.0 * k + q), k + 1.0 - q
    return (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)


@dataclass(frozen=True)
class CriticalThresholds:
    """Threshold temperatures for block size ``m``.

    Optional fields are ``None`` whenever the defining root does not
    exist or the analysis behind it does not cover the instance.  The
    ``m``-dependent fields use the relabelled block ``min(m, q-m)``.

    ``theta_breve``, ``theta_grave`` and ``theta_acute`` belong to ``m = 2``
    and are reported for every ``q`` where their defining root exists:
    ``theta_grave`` for ``q <= 8`` and ``theta_acute`` for ``q >= 9``.

    ``theta_hole_lo < theta_hole_hi`` (``m = 1`` only) bound the interval
    inside ``(theta_1, q+1)`` where :func:`psi1` is negative, so the MSW
    bound does not certify the lower branch there; it is non-empty from
    ``q = 17`` on.
    """

    q: int
    k: int
    m: int
    theta_m: float
    theta_c: float
    fold_meets_critical: bool
    theta_0: Optional[float] = None
    theta_hat_0: Optional[float] = None
    theta_hat: Optional[float] = None
    theta_star: Optional[float] = None
    theta_bar: Optional[float] = None
    theta_barbar: Optional[float] = None
    theta_double_star: Optional[float] = None
    theta_breve: Optional[float] = None
    theta_grave: Optional[float] = None
    theta_acute: Optional[float] = None
    theta_free_msw: Optional[float] = None
    theta_hole_lo: Optional[float] = None
    theta_hole_hi: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)

    def named_values(self) -> dict:
        """Present threshold values keyed by field name."""
        skip = {"q", "k", "m", "fold_meets_critical"}
        return {k: v for k, v in asdict(self).items()
                if k not in skip and v is not None and math.isfinite(v)}


def _cubic_roots(q: int, m: int) -> tuple:
    lo, hi = fold_theta(q, 2, m), q + 1.0
    s = np.poly1d([1.0, -(SQRT2 - 1) * q, -2 * (2 * SQRT2 - 1) * m * (q - m),
                   2 * q * m * (q - m)])
    found = []
    for r in s.r:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)):
            continue
        t = r.real + 1.0
        if not lo < t < hi:
            continue
        f = lambda x: float(fuzzy_cubic(x, q, m))  # noqa: E731
        w = 1e-9 * t
        a, b = max(lo, t - w), min(hi, t + w)
        if f(a) * f(b) < 0:
            found.append(find_root(f, a, b))
    found = sorted(found)
    if len(found) == 2 and found[0] < found[1]:
        return found[0], found[1]
    return None, None


def _first_root(f, lo, hi, n=4001):
    grid = np.linspace(lo, hi, n)
    roots = roots_on_grid(f, grid[1:])
    return roots[0] if roots else None


def critical_thresholds(params: PottsParams, m: int) -> CriticalThresholds:
    """All threshold temperatures for ``(q, k)`` and block size ``m``.

    ``theta`` of ``params`` is ignored.  Only ``theta_m``, ``theta_c`` and
    ``theta_free_msw`` are filled for ``k != 2``.
    """
    params.require_tree()
    m = params.check_block(m)
    return _thresholds(params.q, params.k, m)


@lru_cache(maxsize=1024)
def _thresholds(q: int, k: int, m: int) -> CriticalThresholds:
    mc = min(m, q - m)
    tm = fold_theta(q, k, mc)
    tc = _theta_c(q, k)
    if k == 2:
        meets = (q - 2 * mc) == 0
    else:
        meets = abs(tm - tc) <= 1e-11 * tc
    base = dict(q=q, k=k, m=m, theta_m=tm, theta_c=tc, fold_meets_critical=meets,
                theta_free_msw=free_msw_threshold(q, k))
    if k != 2:
        return CriticalThresholds(**base)

    theta_0 = 1.0 + q + 2.0 * math.sqrt(2.0 * mc * (q - mc))
    theta_hat_0 = 1.0 + (SQRT2 + 1.0) * q
    theta_hat = (SQRT2 - 1.0) * q + 2 * mc + 1.0
    theta_star = 1.0 + (SQRT2 + 1.0) * q - 2 * mc
    bar, barbar = _cubic_roots(q, mc) if 2 * mc < q else (None, None)

    dstar = None
    if mc == 1 and theta_star > q + 1:
        f = lambda t: float(s_poly(t, q))  # noqa: E731
        if f(q + 1.0) < 0 < f(theta_star):
            dstar = find_root(f, q + 1.0, theta_star)

    hole_lo = hole_hi = None
    if mc == 1:
        f = lambda t: float(psi1(t, q))  # noqa: E731
        grid = np.linspace(tm, q + 1.0, 4001)[1:-1]
        roots = roots_on_grid(f, grid)
        if len(roots) == 2:
            hole_lo, hole_hi = roots

    breve = grave = acute = None
    if mc == 2 and q >= 4:
        f = lambda t: float(big_theta(t, q))  # noqa: E731
        if f(tc) > 0 > f(theta_star):
            breve = find_root(f, tc, theta_star)
    if mc == 2 and q >= 4:
        f = lambda t: float(branch_inequality_lhs(t, q, 2, upper=True))  # noqa: E731
        if f(tm) < 0:
            grave = _first_root(f, tm, max(theta_star, q + 1.0) + 1.0)
    if mc == 2 and q >= 4:
        f = lambda t: float(branch_inequality_lhs(t, q, 2, upper=False))  # noqa: E731
        if f(tm) > 0:
            acute = _first_root(f, tm, q + 1.0)

    return CriticalThresholds(
        **base, theta_0=theta_0, theta_hat_0=theta_hat_0, theta_hat=theta_hat,
        theta_star=theta_star, theta_bar=bar, theta_barbar=barbar,
        theta_double_star=dstar, theta_breve=breve, theta_grave=grave,
        theta_acute=acute, theta_hole_lo=hole_lo, theta_hole_hi=hole_hi,
    )


# ---------------------------------------------------------------------------
# branch functions for k = 2


def branch_z(theta, q: int, m: int, upper: bool):
    """Closed-form ``z`` on the lower or upper branch, vectorised over ``theta``."""
    t = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        sd = np.sqrt(_disc(t, q, m))
    x = (t - 1.0 + sd) / (2.0 * m) if upper else 2.0 * (q - m) / (t - 1.0 + sd)
    return x**2


def _ab(theta, q, m, upper):
    t = np.asarray(theta, dtype=float)
    z = branch_z(t, q, m, upper)
    z1 = (t + m - 1) * z + q - m
    return (t - 1) * z / z1, (t - 1) * np.sqrt(z) / z1


def gamma1(theta, q, m):
    """``sqrt(2) a - 1`` along the lower branch."""
    return SQRT2 * _ab(theta, q, m, False)[0] - 1.0


def gamma2(theta, q, m):
    """``sqrt(2) a - 1`` along the upper branch."""
    return SQRT2 * _ab(theta, q, m, True)[0] - 1.0


def xi1(theta, q, m):
    """``sqrt(2) b - 1`` along the lower branch."""
    return SQRT2 * _ab(theta, q, m, False)[1] - 1.0


def xi2(theta, q, m=1):
    """``sqrt(2) b - 1`` along the upper branch."""
    return SQRT2 * _ab(theta, q, m, True)[1] - 1.0
