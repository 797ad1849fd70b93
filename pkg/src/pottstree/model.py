"""Boundary laws and translation-invariant splitting Gibbs measures.

A Potts instance on the rooted Cayley tree is described by the number of
spin values ``q``, the branching number ``k`` and ``theta = exp(J*beta)``.
Translation-invariant boundary laws are, up to permutation of the spin
labels, of the form ``(z, ..., z, 1, ..., 1)`` with ``z`` repeated ``m``
times, where ``z`` is a positive fixed point of

    f_m(z) = g(z)**k,   g(z) = ((theta+m-1) z + q-m) / (m z + theta+q-m-1).

Writing ``z = x**k`` turns the fixed-point problem into the polynomial
equation ``(x - 1) Q(x) = 0`` with

    Q(x) = m x**k - (theta-1) (x**(k-1) + ... + x) + (q-m),

so ``x = 1`` is the free solution and the remaining solutions are the
positive roots of ``Q``.  ``Q(x)/x`` is unimodal on ``(0, inf)``, hence it
has zero, one (double) or two positive roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from ._roots import find_root
from .errors import DomainError, SolverError

#: discriminant window (absolute) treated as an exact double root
FOLD_TOL = 1e-12
#: distance from x = 1 under which a branch is identified with the free law
MERGE_TOL = 1e-12
#: relative fixed-point residual accepted for a returned solution
RESIDUAL_TOL = 1e-12
#: tolerance for deciding that theta sits exactly on a threshold
THRESHOLD_EPS = 1e-11


class Branch(str, Enum):
    """Label of a boundary-law solution for a fixed block size."""

    FREE = "free"
    Z1 = "z1"
    Z2 = "z2"

    @classmethod
    def parse(cls, value) -> "Branch":
        if isinstance(value, Branch):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown branch {value!r}; expected free, z1 or z2") from None


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


@dataclass(frozen=True)
class PottsParams:
    """A ferromagnetic Potts instance on the Cayley tree of order ``k``.

    Parameters
    ----------
    q : int
        Number of spin values, at least 2.
    k : int
        Number of successors of each vertex, at least 1.
    theta : float
        ``exp(J*beta)``; must exceed 1.
    """

    q: int
    k: int
    theta: float

    def __post_init__(self):
        if not _is_int(self.q) or self.q < 2:
            raise DomainError(f"q must be an integer >= 2, got {self.q!r}")
        if not _is_int(self.k) or self.k < 1:
            raise DomainError(f"k must be an integer >= 1, got {self.k!r}")
        theta = float(self.theta)
        if not math.isfinite(theta) or theta <= 1.0:
            raise DomainError(f"theta must be a finite real > 1, got {self.theta!r}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "theta", theta)

    @property
    def beta_j(self) -> float:
        """The product ``J*beta = log(theta)``."""
        return math.log(self.theta)

    @property
    def theta_c(self) -> float:
        """``(q+k-1)/(k-1)``; infinite for ``k = 1``."""
        return theta_c(self.q, self.k)

    def check_block(self, m) -> int:
        if not _is_int(m) or not 1 <= m <= self.q - 1:
            raise DomainError(f"block size m must be an integer in [1, {self.q - 1}], got {m!r}")
        return int(m)

    def require_tree(self) -> None:
        """Raise unless ``k >= 2`` (needed by the extremality analysis)."""
        if self.k < 2:
            raise DomainError("extremality analysis requires k >= 2")


def theta_c(q: int, k: int) -> float:
    """Temperature at which the lower branch passes through ``z = 1``."""
    if k < 2:
        return math.inf
    return (q + k - 1) / (k - 1)


def theta_m(q: int, m: int) -> float:
    """Binary-tree fold ``1 + 2 sqrt(m (q - m))`` where ``Z1`` and ``Z2`` are born."""
    return 1.0 + 2.0 * math.sqrt(m * (q - m))


def fold_theta(q: int, k: int, m: int) -> float:
    """Smallest ``theta`` for which ``f_m`` has a fixed point other than 1.

    For ``k = 2`` this is :func:`theta_m`.  For general ``k`` it is
    ``1 + min_x (m x**k + q - m) / (x + ... + x**(k-1))``.
    """
    if k < 2:
        return math.inf
    if k == 2:
        return theta_m(q, m)

    def h(logx):
        x = math.exp(logx)
        return (m * x**k + (q - m)) / sum(x**j for j in range(1, k))

    res = minimize_scalar(h, bounds=(-20.0, 20.0), method="bounded",
                          options={"xatol": 1e-12})
    return 1.0 + float(res.fun)


@dataclass(frozen=True)
class TisgmSolution:
    """A translation-invariant boundary law ``(z,...,z,1,...,1)``.

    Attributes
    ----------
    q, k, m : int
        Instance size, tree order and the number of coordinates carrying ``z``.
    branch : Branch
        ``FREE`` for ``z = 1``; ``Z1``/``Z2`` for the lower/upper nontrivial root.
    z : float
        Boundary-law value.
    degenerate : bool
        True at the fold, where ``Z1`` and ``Z2`` coincide.
    merged_with_free : bool
        True for a nontrivial branch evaluated exactly where it passes
        through ``z = 1``.
    """

    q: int
    k: int
    m: int
    branch: Branch
    z: float
    degenerate: bool = False
    merged_with_free: bool = False

    def __post_init__(self):
        if self.branch is Branch.FREE and self.z != 1.0:
            raise DomainError("the free solution has z = 1")
        if not self.z > 0:
            raise DomainError("z must be positive")

    @property
    def x(self) -> float:
        """``z**(1/k)``, the value of ``g`` at the fixed point."""
        return 1.0 if self.z == 1.0 else self.z ** (1.0 / self.k)

    @property
    def subset_mask(self) -> tuple:
        """Coordinates carrying ``z`` (canonically the first ``m``)."""
        return tuple(i < self.m for i in range(self.q))

    @property
    def log_fields(self) -> np.ndarray:
        """Length ``q-1`` vector with ``log z`` on the block and 0 elsewhere."""
        h = np.zeros(self.q - 1)
        h[: min(self.m, self.q - 1)] = math.log(self.z)
        return h

    @property
    def beyond_half(self) -> bool:
        """True when ``m > q/2``; such laws relabel to ``(q-m, 1/z)``."""
        return 2 * self.m > self.q


def g(params: PottsParams, m: int, z):
    """``g(z) = ((theta+m-1) z + q-m) / (m z + theta+q-m-1)``."""
    m = params.check_block(m)
    t, q = params.theta, params.q
    if isinstance(z, float):
        if not z > 0:
            raise DomainError("z must be positive")
        return ((t + m - 1) * z + q - m) / (m * z + t + q - m - 1)
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("z must be positive")
    out = ((t + m - 1) * z + q - m) / (m * z + t + q - m - 1)
    return float(out) if out.ndim == 0 else out


def f_m(params: PottsParams, m: int, z):
    """The boundary-law map ``g(z)**k``; accepts scalars or arrays."""
    return g(params, m, z) ** params.k


# ---------------------------------------------------------------------------
# roots of Q


def _r(x: float, t: float, q: int, k: int, m: int) -> float:
    # Q(x)/x, evaluated without cancellation-prone closed forms.
    geo, p = 0.0, 1.0
    for _ in range(k - 1):
        geo += p
        p *= x
    return m * x ** (k - 1) - (t - 1.0) * geo + (q - m) / x


def _s(x: float, t: float, q: int, k: int, m: int) -> float:
    # x**2 * d/dx [Q(x)/x]; a single positive root by Descartes' rule.
    mid, p = 0.0, x * x
    for j in range(1, k - 1):
        mid += j * p
        p *= x
    return m * (k - 1) * x**k - (t - 1.0) * mid - (q - m)


def _roots_closed(t: float, q: int, m: int):
    disc = (t - 1.0) ** 2 - 4.0 * m * (q - m)
    if disc < -FOLD_TOL:
        return None
    if disc <= FOLD_TOL:
        x = (t - 1.0) / (2.0 * m)
        return x, x, True
    sd = math.sqrt(disc)
    # the lower root in the form free of cancellation
    return 2.0 * (q - m) / (t - 1.0 + sd), (t - 1.0 + sd) / (2.0 * m), False


def _roots_numeric(t: float, q: int, k: int, m: int):
    if k < 2:
        return None
    if k == 2:
        # the roots are still found by Brent; only the minimiser is explicit
        c, d = t - 1.0, float(q - m)
        r = lambda x: m * x - c + d / x  # noqa: E731
        xstar = math.sqrt(d / m)
    else:
        s = lambda x: _s(x, t, q, k, m)  # noqa: E731
        r = lambda x: _r(x, t, q, k, m)  # noqa: E731
        hi = 1.0
        while s(hi) <= 0.0:
            hi *= 2.0
        xstar = find_root(s, 0.0, hi, polish=False)
    rmin = r(xstar)
    scale = (t - 1.0) + q
    if rmin > FOLD_TOL * scale:
        return None
    if rmin >= -FOLD_TOL * scale:
        return xstar, xstar, True
    lo = xstar / 2.0
    while r(lo) <= 0.0:
        lo /= 2.0
    up = 2.0 * xstar
    while r(up) <= 0.0:
        up *= 2.0
    return find_root(r, lo, xstar), find_root(r, xstar, up), False


def _nontrivial_roots(params: PottsParams, m: int, method: str):
    """Roots ``x`` of ``Q`` as ``(x1, x2, degenerate)`` or ``None``."""
    if method not in ("auto", "closed", "numeric"):
        raise DomainError(f"unknown method {method!r}")
    if params.k < 2:
        return None
    if method == "closed" and params.k != 2:
        raise DomainError("closed-form roots exist only for k = 2")
    use_closed = params.k == 2 and method in ("auto", "closed")
    if use_closed:
        return _roots_closed(params.theta, params.q, m)
    return _roots_numeric(params.theta, params.q, params.k, m)


def _make(params, m, branch, x, degenerate) -> TisgmSolution:
    if abs(x - 1.0) <= MERGE_TOL:
        return TisgmSolution(params.q, params.k, m, branch, 1.0,
                             degenerate=degenerate, merged_with_free=True)
    z = x**params.k
    resid = abs(f_m(params, m, z) - z)
    if resid > RESIDUAL_TOL * max(1.0, z):
        raise SolverError(
            f"fixed-point residual {resid:.3e} too large for m={m}, {branch.value}",
            residual=resid,
        )
    return TisgmSolution(params.q, params.k, m, branch, z, degenerate=degenerate)


def solve_boundary_laws(params: PottsParams, m: int, method: str = "auto") -> list:
    """All positive fixed points of ``f_m`` sorted by ``z``.

    Parameters
    ----------
    params : PottsParams
    m : int
        Block size, ``1 <= m <= q-1``.
    method : {"auto", "closed", "numeric"}
        ``closed`` uses the quadratic formula (``k = 2`` only); ``numeric``
        uses bracketed Brent iterations on ``Q(x)/x``; ``auto`` picks the
        closed form when available.

    Returns
    -------
    list of TisgmSolution
        Always contains the free law.  At the fold the double root is
        returned once as ``Z1`` with ``degenerate=True``; a branch passing
        through ``z = 1`` is absorbed by the free law.
    """
    m = params.check_block(m)
    out = [TisgmSolution(params.q, params.k, m, Branch.FREE, 1.0)]
    roots = _nontrivial_roots(params, m, method)
    if roots is not None:
        x1, x2, degenerate = roots
        cands = [(Branch.Z1, x1)] if degenerate else [(Branch.Z1, x1), (Branch.Z2, x2)]
        for br, x in cands:
            sol = _make(params, m, br, x, degenerate)
            if not sol.merged_with_free:
                out.append(sol)
    return sorted(out, key=lambda s: s.z)


def branch_solution(params: PottsParams, m: int, branch, method: str = "auto") -> TisgmSolution:
    """The solution on one named branch.

    Unlike :func:`solve_boundary_laws` this never drops a branch that
    coincides with another one: at the fold both ``Z1`` and ``Z2`` return
    the double root, and a branch through ``z = 1`` is returned with
    ``merged_with_free=True``.

    Raises
    ------
    DomainError
        If the requested branch does not exist at this ``theta``.
    """
    m = params.check_block(m)
    branch = Branch.parse(branch)
    if branch is Branch.FREE:
        return TisgmSolution(params.q, params.k, m, Branch.FREE, 1.0)
    roots = _nontrivial_roots(params, m, method)
    if roots is None:
        raise DomainError(
            f"branch {branch.value} does not exist for q={params.q}, k={params.k}, "
            f"m={m}, theta={params.theta!r} (below the fold "
            f"{fold_theta(params.q, params.k, m)!r})"
        )
    x1, x2, degenerate = roots
    return _make(params, m, branch, x1 if branch is Branch.Z1 else x2, degenerate)


def iterate_bounds(params: PottsParams, m: int, n: int) -> tuple:
    """Bounds on every (possibly non-homogeneous) boundary-law value.

    Starts from ``(a**k, A**k)`` with ``a = (q-m)/(q+theta-m-1)`` and
    ``A = (theta+m-1)/m`` and applies ``f_m`` ``n`` times to each end.
    The lower sequence increases to ``min{1, z1, z2}`` and the upper one
    decreases to ``max{1, z1, z2}``.
    """
    m = params.check_block(m)
    if not _is_int(n) or n < 0:
        raise DomainError("n must be a non-negative integer")
    q, t, k = params.q, params.theta, params.k
    lo = ((q - m) / (q + t - m - 1)) ** k
    hi = ((t + m - 1) / m) ** k
    for _ in range(n):
        lo_new, hi_new = f_m(params, m, lo), f_m(params, m, hi)
        if lo_new == lo and hi_new == hi:
            break
        lo, hi = lo_new, hi_new
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# enumeration and counting


@dataclass(frozen=True)
class EnumeratedTisgm:
    """One canonical solution together with the size of its label orbit."""

    solution: TisgmSolution
    orbit_size: int
    alias_of: Optional[tuple] = None

    @property
    def counted(self) -> bool:
        """False for entries that relabel onto another (``m``, branch)."""
        return self.alias_of is None


@dataclass(frozen=True)
class TisgmEnumeration:
    params: PottsParams
    entries: tuple
    total: int
    regime: str = field(default="")

    def counted_entries(self) -> list:
        return [e for e in self.entries if e.counted]


def _alias(sol: TisgmSolution):
    # (m, z) and (q-m, 1/z) describe the same measure up to relabelling.
    q, m = sol.q, sol.m
    if sol.branch is Branch.FREE:
        return None
    if 2 * m > q:
        other = sol.branch if sol.degenerate else (
            Branch.Z2 if sol.branch is Branch.Z1 else Branch.Z1)
        return (q - m, other)
    if 2 * m == q and sol.branch is Branch.Z2:
        return (m, Branch.Z1)
    return None


def enumerate_tisgms(params: PottsParams, method: str = "auto") -> TisgmEnumeration:
    """Every translation-invariant splitting Gibbs measure, up to relabelling.

    Returns one entry for the free measure and one entry per
    (``m``, branch) with orbit size ``binomial(q, m)``.  Entries for
    ``m > q/2`` (and ``Z2`` at ``m = q/2``) are kept but flagged as aliases;
    ``total`` sums the orbit sizes of the non-alias entries.
    """
    q = params.q
    free = TisgmSolution(q, params.k, 1, Branch.FREE, 1.0)
    entries = [EnumeratedTisgm(free, 1)]
    for m in range(1, q):
        for sol in solve_boundary_laws(params, m, method):
            if sol.branch is Branch.FREE:
                continue
            entries.append(EnumeratedTisgm(sol, math.comb(q, m), _alias(sol)))
    total = sum(e.orbit_size for e in entries if e.counted)
    return TisgmEnumeration(params, tuple(entries), total, count_regime(params))


def count_tisgms(params: PottsParams, method: str = "auto") -> int:
    """Number of translation-invariant splitting Gibbs measures."""
    return enumerate_tisgms(params, method).total


def count_regime(params: PottsParams) -> str:
    """Name of the temperature regime for ``k = 2``.

    One of ``unique``, ``intermediate(m=..)``, ``full``, ``critical`` or
    ``fold(m=..)``; ``general-k`` for other tree orders.
    """
    if params.k != 2:
        return "general-k"
    q, t = params.q, params.theta
    if abs(t - (q + 1)) <= THRESHOLD_EPS:
        return "critical"
    half = q // 2
    for m in range(1, half + 1):
        disc = (t - 1.0) ** 2 - 4.0 * m * (q - m)
        if abs(disc) <= FOLD_TOL:
            return f"fold(m={m})"
    if t < theta_m(q, 1):
        return "unique"
    if t > theta_m(q, half):
        return "full"
    top = max(m for m in range(1, half + 1) if t > theta_m(q, m))
    return f"intermediate(m={top})"
