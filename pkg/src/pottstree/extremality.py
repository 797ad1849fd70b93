"""Extremality tests for translation-invariant splitting Gibbs measures.

Three criteria are evaluated for every boundary-law solution:

``KS``
    ``k * lambda_hat**2 > 1`` makes reconstruction solvable, hence the
    measure is not extreme.
``MSW``
    ``k * kappa * gamma < 1`` makes reconstruction impossible, hence the
    measure is extreme.  ``kappa`` is the largest total-variation distance
    between two rows of ``P``; ``gamma`` is bounded analytically.
``Martin``
    ``k (sqrt(p11 p22) - sqrt(p12 p21))**2 <= 1`` on the lumped 2-state
    chain certifies extremality of the lumped measure only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .chains import ChainMatrices, build_chain
from .model import (Branch, PottsParams, TisgmSolution, enumerate_tisgms)
from .thresholds import CriticalThresholds, critical_thresholds


class Verdict(str, Enum):
    NON_EXTREME_KS = "NonExtreme(KS)"
    EXTREME_MSW = "Extreme(MSW)"
    EXTREME_FUZZY = "ExtremeFuzzy(Martin)"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class KsResult:
    value_full: float
    value_fuzzy: float
    fires: bool


def kesten_stigum(chain: ChainMatrices, k: int) -> KsResult:
    """``k lambda_hat**2`` for the full chain and ``k lambda_2**2`` for the lumped one."""
    full = k * chain.lambda_hat**2
    fuzzy = k * chain.lambda2_hat**2
    return KsResult(full, fuzzy, full > 1.0)


def martin_condition(p_hat: np.ndarray, k: int) -> tuple:
    """``k (sqrt(p11 p22) - sqrt(p12 p21))**2`` and whether it is at most 1."""
    p = np.asarray(p_hat, dtype=float)
    value = k * (math.sqrt(p[0, 0] * p[1, 1]) - math.sqrt(p[0, 1] * p[1, 0])) ** 2
    return value, value <= 1.0


def kappa_from_matrix(P: np.ndarray) -> float:
    """Half the largest l1 distance between two rows of ``P``."""
    P = np.asarray(P, dtype=float)
    d = np.abs(P[:, None, :] - P[None, :, :]).sum(axis=2)
    return 0.5 * float(d.max())


def cross_block_distance(theta: float, q: int, m: int, z: float, k: int) -> float:
    """Total-variation distance between a row of each block."""
    x = 1.0 if z == 1.0 else z ** (1.0 / k)
    z1 = (theta + m - 1) * z + q - m
    return (z * abs(theta - x) + abs(1 - theta * x)
            + (z * (m - 1) + q - m - 1) * abs(1 - x)) / (2 * z1)


def canonical_law(q: int, m: int, z: float) -> tuple:
    """Relabel ``(m, z)`` so that ``m <= q/2``, preferring ``z >= 1`` at ``m = q/2``."""
    if 2 * m > q or (2 * m == q and z < 1.0):
        return q - m, 1.0 / z
    return m, z


def gamma_bound(theta: float, z: float, paper_exact: bool = False) -> tuple:
    """Upper bound on the upward disagreement constant ``gamma``.

    Returns ``(bound, kind, capped)`` where ``kind`` is ``"z>=1"`` for
    ``(theta-1)/(theta+1)`` and ``"z<1"`` for ``(theta-1)/(theta+1) + 1 - z``.
    Outside paper-exact mode the bound is capped at 1, which is always
    valid for a total-variation quantity.
    """
    r = (theta - 1.0) / (theta + 1.0)
    if z >= 1.0:
        return r, "z>=1", False
    value = r + 1.0 - z
    if not paper_exact and value > 1.0:
        return 1.0, "z<1", True
    return value, "z<1", False


@dataclass(frozen=True)
class MswBound:
    a: Optional[float]
    b: Optional[float]
    c: float
    kappa: float
    gamma_kind: str
    gamma_bound: float
    gamma_capped: bool
    msw_value: float

    @property
    def extreme(self) -> bool:
        return self.msw_value < 1.0


def msw_bound(params: PottsParams, sol: TisgmSolution,
              chain: Optional[ChainMatrices] = None, paper_exact: bool = False) -> MswBound:
    """``kappa``, the ``gamma`` bound and ``k kappa gamma`` for ``sol``.

    ``kappa`` is the maximum of ``a`` (pairs inside the first block, when
    ``m >= 2``), ``b`` (pairs inside the second block, when ``q-m >= 2``)
    and the cross-block distance ``c``.  The ``gamma`` bound is taken for
    the relabelled law with ``m <= q/2``.
    """
    chain = chain if chain is not None else build_chain(params, sol)
    c = cross_block_distance(params.theta, params.q, sol.m, sol.z, params.k)
    parts = [v for v in (chain.a, chain.b) if v is not None] + [c]
    kappa = max(parts)
    _, zc = canonical_law(params.q, sol.m, sol.z)
    gb, kind, capped = gamma_bound(params.theta, zc, paper_exact)
    return MswBound(chain.a, chain.b, c, kappa, kind, gb, capped, params.k * kappa * gb)


@dataclass(frozen=True)
class ExtremalityVerdict:
    """Classification of one measure.

    ``margins`` holds signed distances to the threshold 1, oriented so that
    a positive value means the criterion fires: ``ks = ks_value - 1``,
    ``msw = 1 - msw_value`` and ``martin = 1 - martin_value``.
    ``fuzzy_verdict`` records the Martin outcome for the lumped chain,
    which does not transfer to the measure itself.
    """

    measure_id: tuple
    ks_value: float
    ks_value_fuzzy: float
    martin_value: float
    kappa: float
    gamma_bound: float
    msw_value: float
    verdict: Verdict
    fuzzy_verdict: Optional[Verdict]
    region: str
    margins: dict = field(default_factory=dict)
    msw: Optional[MswBound] = None
    chain: Optional[ChainMatrices] = None


def classify(params: PottsParams, sol: TisgmSolution, paper_exact: bool = False,
             thresholds: Optional[CriticalThresholds] = None) -> ExtremalityVerdict:
    """Apply KS, then MSW; report Martin on the lumped chain separately."""
    params.require_tree()
    chain = build_chain(params, sol)
    ks = kesten_stigum(chain, params.k)
    msw = msw_bound(params, sol, chain, paper_exact)
    martin, martin_holds = martin_condition(chain.P_hat, params.k)
    if ks.fires:
        verdict = Verdict.NON_EXTREME_KS
    elif msw.extreme:
        verdict = Verdict.EXTREME_MSW
    else:
        verdict = Verdict.UNDECIDED
    fuzzy = Verdict.EXTREME_FUZZY if martin_holds else None
    margins = {"ks": ks.value_full - 1.0, "msw": 1.0 - msw.msw_value,
               "martin": 1.0 - martin}
    region = region_annotation(params, sol, thresholds)
    return ExtremalityVerdict((sol.m, sol.branch), ks.value_full, ks.value_fuzzy,
                              martin, msw.kappa, msw.gamma_bound, msw.msw_value,
                              verdict, fuzzy, region, margins, msw, chain)


def _canonical_branch(sol: TisgmSolution) -> tuple:
    q, m = sol.q, sol.m
    if sol.branch is Branch.FREE:
        return m, Branch.FREE, False
    if 2 * m > q:
        br = sol.branch if sol.degenerate else (
            Branch.Z2 if sol.branch is Branch.Z1 else Branch.Z1)
        return q - m, br, True
    if 2 * m == q and sol.z < 1.0:
        return m, Branch.Z2, True
    return m, sol.branch, False


def region_annotation(params: PottsParams, sol: TisgmSolution,
                      thresholds: Optional[CriticalThresholds] = None) -> str:
    """Descriptive name of the known extremality region containing ``sol``."""
    if params.k != 2:
        return "general-k"
    t, q = params.theta, params.q
    m, br, relabelled = _canonical_branch(sol)
    th = thresholds
    if th is None or min(th.m, q - th.m) != m:
        th = critical_thresholds(params, m)
    suffix = "|relabelled" if relabelled else ""

    if br is Branch.FREE:
        if t < th.theta_free_msw:
            slug = "free:msw-extreme"
        elif t > th.theta_hat_0:
            slug = "free:ks-nonextreme"
        elif q + 1 <= t <= th.theta_0:
            slug = "free:fuzzy-martin-extreme"
        else:
            slug = "free:gap"
        return slug

    if m == 1:
        if br is Branch.Z2:
            return "m1-upper:always-extreme" + suffix
        if t > th.theta_star:
            return "m1-lower:ks-nonextreme" + suffix
        if th.theta_hole_lo is not None and th.theta_hole_lo < t < th.theta_hole_hi:
            return "m1-lower:gap" + suffix
        if th.theta_double_star is not None and t < th.theta_double_star:
            return "m1-lower:msw-window" + suffix
        return "m1-lower:gap" + suffix

    if 7 * m <= q:
        if br is Branch.Z2:
            return "upper:ks-nonextreme-large-q" + suffix
        if t < th.theta_hat:
            return "lower:ks-nonextreme-below-theta-hat" + suffix
    else:
        if br is Branch.Z2:
            if t > th.theta_hat:
                return "upper:ks-nonextreme-above-theta-hat" + suffix
            if th.theta_grave is not None and t < th.theta_grave:
                return "upper:msw-window" + suffix
            return "upper:gap" + suffix
    if t > th.theta_star:
        return "lower:ks-nonextreme-above-theta-star" + suffix
    if th.theta_bar is not None and th.theta_bar < t < th.theta_barbar:
        return "lower:fuzzy-ks-nonextreme" + suffix
    if th.theta_breve is not None and t < th.theta_breve and (
            th.theta_acute is None or t >= th.theta_acute):
        return "lower:msw-window" + suffix
    return "lower:gap" + suffix


def count_extremal_lower_bound(params: PottsParams, paper_exact: bool = False) -> int:
    """Number of measures (with label orbits) certified extreme by MSW."""
    params.require_tree()
    total = 0
    for entry in enumerate_tisgms(params).counted_entries():
        v = classify(params, entry.solution, paper_exact)
        if v.verdict is Verdict.EXTREME_MSW:
            total += entry.orbit_size
    return total


# ---------------------------------------------------------------------------
# gamma bound verification


def k_functions(theta: float, z: float, p1, p2, u) -> tuple:
    """The four disagreement functions on ``{p1, p2, u >= 0, p1+p2+u <= 1}``.

    They are the values of ``p^s(s) - p^t(s)`` for ``s, t`` in the first
    block (``K1``), ``s`` first / ``t`` second (``K2``), ``s`` second /
    ``t`` first (``K3``) and both in the second block (``K4``), with
    ``p1 = p(s)``, ``p2 = p(t)`` and ``u`` the free mass of the second block
    excluding ``s``.
    """
    t = theta
    p1, p2, u = (np.asarray(v, dtype=float) for v in (p1, p2, u))
    head1 = t * z * p1 / ((t - 1) * z * p1 + (1 - z) * u + z)
    head3 = t * p1 / ((t - z) * p1 + (1 - z) * u + z)
    k1 = head1 - z * p1 / ((t - 1) * z * p2 + (1 - z) * u + z)
    k2 = head1 - z * p1 / ((t - 1) * p2 + (1 - z) * u + z)
    k3 = head3 - p1 / ((t - 1) * z * p2 + (1 - z) * (u + p1) + z)
    k4 = head3 - p1 / ((t - 1) * p2 + (1 - z) * (u + p1) + z)
    return k1, k2, k3, k4


def conditional_marginals(theta: float, z: float, m: int, p) -> np.ndarray:
    """Table ``T[t, s]``: law at a site given its outside neighbour has spin ``t``.

    ``p`` is the law at the site with the neighbour removed; the neighbour
    multiplies it by ``theta**[s == t] * l_s`` with ``l_s = z`` on the
    first block and 1 elsewhere.
    """
    p = np.asarray(p, dtype=float)
    q = p.size
    weights = np.where(np.arange(q) < m, z, 1.0) * p
    T = np.tile(weights, (q, 1))
    T[np.arange(q), np.arange(q)] *= theta
    return T / T.sum(axis=1, keepdims=True)


def pairwise_disagreement(theta: float, z: float, m: int, p) -> float:
    """``max_{s != t} p^s(s) - p^t(s)`` for a site law ``p``."""
    T = conditional_marginals(theta, z, m, p)
    diag = np.diag(T)
    d = diag[None, :] - T  # d[t, s] = p^s(s) - p^t(s)
    np.fill_diagonal(d, -np.inf)
    return float(d.max())


@dataclass(frozen=True)
class GammaCheck:
    """Result of maximising ``K1..K4`` over the simplex.

    ``bound_k24`` is the bound that applies at this ``z``:
    ``(theta-1)/(theta+1) + 1 - z`` for ``z <= 1`` and
    ``(theta-1)/(theta+1)`` otherwise (there ``K2 <= K1`` and ``K4 <= K3``).
    ``additive_bound`` is ``(theta-1)/(theta+1) + 1 - z`` whatever ``z``.
    """

    theta: float
    z: float
    k_max: tuple
    k_argmax: tuple
    bound_k13: float
    bound_k24: float
    additive_bound: float
    ok: bool
    violations: tuple


def _simplex_grid(n: int):
    i, j, l = np.meshgrid(np.arange(n + 1), np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j + l <= n
    return i[keep] / n, j[keep] / n, l[keep] / n


def verify_gamma_bounds(params: PottsParams, sol: TisgmSolution, grid_resolution: int = 200,
                        refine: bool = True, tol: float = 1e-9,
                        bound_k13: Optional[float] = None) -> GammaCheck:
    """Maximise ``K1..K4`` on a simplex grid, refine locally, compare with the bounds.

    Parameters
    ----------
    grid_resolution : int
        Number of steps per axis; the grid has ``O(n**3 / 6)`` points.
    refine : bool
        Polish the best grid point of each function with SLSQP.
    bound_k13 : float, optional
        Override of ``(theta-1)/(theta+1)``, used for negative controls.
    """
    theta = params.theta
    _, z = canonical_law(params.q, sol.m, sol.z)
    p1, p2, u = _simplex_grid(grid_resolution)
    vals = k_functions(theta, z, p1, p2, u)
    best, where = [], []
    for idx, v in enumerate(vals):
        i = int(np.argmax(v))
        x0 = np.array([p1[i], p2[i], u[i]])
        vmax = float(v[i])
        if refine:
            fun = lambda x, idx=idx: -float(k_functions(theta, z, *x)[idx])  # noqa: E731
            res = minimize(fun, x0, method="SLSQP", bounds=[(0, 1)] * 3,
                           constraints=[{"type": "ineq", "fun": lambda x: 1.0 - x.sum()}],
                           options={"ftol": 1e-15, "maxiter": 200})
            xr = np.clip(res.x, 0.0, 1.0)
            if xr.sum() > 1.0:
                xr = xr / xr.sum()
            vr = float(k_functions(theta, z, *xr)[idx])
            if vr > vmax:
                vmax, x0 = vr, xr
        best.append(vmax)
        where.append(tuple(float(c) for c in x0))
    r = (theta - 1.0) / (theta + 1.0) if bound_k13 is None else bound_k13
    additive = (theta - 1.0) / (theta + 1.0) + 1.0 - z
    b24 = additive if z <= 1.0 else r
    violations = []
    for idx, (v, bnd) in enumerate(zip(best, (r, b24, r, b24))):
        if v > bnd + tol:
            violations.append(f"K{idx + 1}={v!r} exceeds {bnd!r}")
    return GammaCheck(theta, z, tuple(best), tuple(where), r, b24, additive,
                      not violations, tuple(violations))
