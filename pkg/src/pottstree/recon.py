"""Empirical reconstruction probe on finite k-ary trees.

A chain is broadcast from the root of the rooted tree in which every
vertex has ``k`` children.  For every depth ``d`` the spins at generation
``d`` are used to compute the exact posterior of the root spin by upward
message passing, and the statistic

    S_d = sum_i w_i E[ TV(posterior_d, prior) | root = i ] / S_0

is reported.  ``S_0 = 1`` by construction and ``S_d`` is non-increasing
in ``d`` when ``w`` equals the prior.  Vertices are indexed in heap
order (the children of ``v`` are ``k v + 1, ..., k v + k``), which is
also the left-to-right order of every generation.

Randomness is counter based: sample ``j`` of seed ``s`` uses a Philox
stream keyed by ``s + j * 2**64`` and vertex ``v`` consumes the ``v``-th
uniform of that stream, so results do not depend on how samples are
split across workers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .chains import ChainMatrices
from .errors import BudgetExceeded, DomainError

MIN_SAMPLES = 100
_CHUNK_CELLS = 1 << 21  # samples * vertices processed per block
_BOOT_KEY = 0x5EED_B007 << 64


class RootPrior(str, Enum):
    STATIONARY = "stationary"
    UNIFORM = "uniform"
    FIXED = "fixed"


class Estimator(str, Enum):
    LEAF_TV = "LeafTV"
    MAJORITY = "MajorityAgreement"


class Decision(str, Enum):
    PERSISTS = "SignalPersists"
    DECAYS = "SignalDecays"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SimConfig:
    """Settings of a reconstruction run.

    Attributes
    ----------
    depth : int
        Deepest generation examined.
    samples : int
        Trees drawn per root spin (Monte Carlo only).
    seed : int
        Seed in ``[0, 2**64)``.
    root_prior : RootPrior
        Prior of the root spin; ``FIXED`` conditions on ``fixed_spin`` and
        uses the stationary law as the reference prior.
    fixed_spin : int, optional
        Spin in ``1..q`` for ``FIXED``.
    estimator : Estimator
    method : {"auto", "exact", "mc"}
        ``auto`` runs the exact recursion when it fits in
        ``exact_budget`` and Monte Carlo otherwise.
    node_budget : int
        Upper bound on ``depth * k**depth``.
    exact_budget : int
        Upper bound on the number of child-message combinations the exact
        recursion may enumerate at one generation.
    workers : int
        Threads used by Monte Carlo; output does not depend on it.
    bootstrap : int
        Bootstrap resamples for standard errors.
    n_sigma : float
        Width, in standard errors, of the decision bands.
    """

    depth: int
    samples: int = 2000
    seed: int = 0
    root_prior: RootPrior = RootPrior.STATIONARY
    fixed_spin: Optional[int] = None
    estimator: Estimator = Estimator.LEAF_TV
    method: str = "auto"
    node_budget: int = 10**7
    exact_budget: int = 2_000_000
    workers: int = 1
    bootstrap: int = 200
    n_sigma: float = 3.0

    def validate(self, q: int, k: int) -> None:
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise DomainError("depth must be a positive integer")
        if self.samples < MIN_SAMPLES:
            raise DomainError(f"samples must be at least {MIN_SAMPLES}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must lie in [0, 2**64)")
        if self.method not in ("auto", "exact", "mc"):
            raise DomainError(f"unknown method {self.method!r}")
        if self.workers < 1:
            raise DomainError("workers must be positive")
        if self.root_prior is RootPrior.FIXED:
            if self.fixed_spin is None or not 1 <= self.fixed_spin <= q:
                raise DomainError("a fixed root prior needs fixed_spin in 1..q")
        if self.depth * k**self.depth > self.node_budget:
            raise BudgetExceeded(
                f"depth*k**depth = {self.depth * k**self.depth} exceeds the node "
                f"budget {self.node_budget}")


@dataclass(frozen=True)
class ReconEstimate:
    """Per-depth statistic with standard errors and a decision.

    ``depths`` runs from 1 to the configured depth.  ``limit`` is the
    Aitken extrapolation of the last three depths (``None`` when fewer
    than three positive depths exist or the sequence is not contracting).
    """

    depths: np.ndarray
    statistic: np.ndarray
    stderr: np.ndarray
    method: str
    estimator: Estimator
    decision: Decision
    limit: Optional[float] = None
    limit_stderr: Optional[float] = None


def _weights(chain: ChainMatrices, cfg: SimConfig):
    q = chain.q
    if cfg.root_prior is RootPrior.STATIONARY:
        return chain.pi.copy(), chain.pi.copy()
    if cfg.root_prior is RootPrior.UNIFORM:
        u = np.full(q, 1.0 / q)
        return u, u.copy()
    w = np.zeros(q)
    w[cfg.fixed_spin - 1] = 1.0
    return w, chain.pi.copy()


def _tv_to_prior(lik: np.ndarray, prior: np.ndarray) -> np.ndarray:
    post = lik * prior
    post = post / post.sum(axis=-1, keepdims=True)
    return 0.5 * np.abs(post - prior).sum(axis=-1)


def _apply(P: np.ndarray, msg: np.ndarray) -> np.ndarray:
    # (P @ msg) along the last axis, written elementwise so that every
    # entry is rounded identically whatever the array shape.
    q = P.shape[0]
    out = np.zeros_like(msg)
    for a in range(q):
        acc = P[a, 0] * msg[..., 0]
        for b in range(1, q):
            acc = acc + P[a, b] * msg[..., b]
        out[..., a] = acc
    return out


# ---------------------------------------------------------------------------
# broadcast


def _level_start(k: int, level: int) -> int:
    return level if k == 1 else (k**level - 1) // (k - 1)


def _n_vertices(k: int, depth: int) -> int:
    return _level_start(k, depth + 1)


def tree_uniforms(seed: int, sample: int, n_vertices: int) -> np.ndarray:
    """Uniforms of one sample; entry ``v`` belongs to vertex ``v``."""
    bitgen = np.random.Philox(key=int(seed) + (int(sample) << 64))
    return np.random.Generator(bitgen).random(n_vertices)


def _broadcast(cum: np.ndarray, root: np.ndarray, U: np.ndarray, k: int, depth: int) -> np.ndarray:
    # Spins of all vertices (heap order) for a block of samples.
    n, nv = U.shape
    spins = np.empty((n, nv), dtype=np.int16)
    spins[:, 0] = root
    q = cum.shape[1]
    for level in range(1, depth + 1):
        lo, hi = _level_start(k, level), _level_start(k, level + 1)
        parents = spins[:, (np.arange(lo, hi) - 1) // k]
        u = U[:, lo:hi]
        thresholds = cum[parents]  # (n, width, q)
        spins[:, lo:hi] = np.minimum((u[..., None] >= thresholds).sum(axis=-1), q - 1)
    return spins


def broadcast_sample(chain: ChainMatrices, root_spin: int, depth: int, seed: int = 0,
                     sample: int = 0, k: Optional[int] = None) -> np.ndarray:
    """Spins of generation ``depth`` below a root with spin ``root_spin``.

    Spins take values in ``1..q`` and are returned left to right, which is
    the depth-first leaf order.  ``k`` defaults to the tree order of
    ``chain``.
    """
    k = chain.k if k is None else k
    if not 1 <= root_spin <= chain.q:
        raise DomainError("root_spin must lie in 1..q")
    if depth < 0:
        raise DomainError("depth must be non-negative")
    cum = np.cumsum(chain.P, axis=1)
    U = tree_uniforms(seed, sample, _n_vertices(k, depth))[None, :]
    spins = _broadcast(cum, np.array([root_spin - 1]), U, k, depth)
    return spins[0, _level_start(k, depth):].astype(int) + 1


# ---------------------------------------------------------------------------
# per-sample statistics


def _posterior_tv_by_depth(spins: np.ndarray, P: np.ndarray, prior: np.ndarray,
                           k: int, depth: int) -> np.ndarray:
    n = spins.shape[0]
    q = P.shape[0]
    out = np.empty((n, depth + 1))
    eye = np.eye(q)
    for d in range(depth + 1):
        lo, hi = _level_start(k, d), _level_start(k, d + 1)
        msg = eye[spins[:, lo:hi]]  # (n, k**d, q)
        for _ in range(d):
            up = _apply(P, msg)
            msg = up.reshape(n, -1, k, q).prod(axis=2)
            msg = msg / msg.sum(axis=-1, keepdims=True)
        out[:, d] = _tv_to_prior(msg[:, 0, :], prior)
    return out


def _majority_by_depth(spins: np.ndarray, q: int, k: int, depth: int) -> np.ndarray:
    n = spins.shape[0]
    out = np.empty((n, depth + 1))
    root = spins[:, 0]
    for d in range(depth + 1):
        lo, hi = _level_start(k, d), _level_start(k, d + 1)
        counts = np.stack([(spins[:, lo:hi] == s).sum(axis=1) for s in range(q)], axis=1)
        out[:, d] = (np.argmax(counts, axis=1) == root).astype(float)
    return out


def _mc_block(chain, cfg, k, start, stop, roots, prior):
    nv = _n_vertices(k, cfg.depth)
    U = np.stack([tree_uniforms(cfg.seed, j, nv) for j in range(start, stop)])
    cum = np.cumsum(chain.P, axis=1)
    res = []
    for r in roots:
        spins = _broadcast(cum, np.full(stop - start, r), U, k, cfg.depth)
        if cfg.estimator is Estimator.LEAF_TV:
            res.append(_posterior_tv_by_depth(spins, chain.P, prior, k, cfg.depth))
        else:
            res.append(_majority_by_depth(spins, chain.q, k, cfg.depth))
    return np.stack(res)  # (roots, samples, depth+1)


def _mc_values(chain: ChainMatrices, cfg: SimConfig, k: int) -> np.ndarray:
    """Per-sample statistic, shape ``(samples, depth+1)``, normalised."""
    w, prior = _weights(chain, cfg)
    roots = [int(r) for r in np.flatnonzero(w > 0)]
    nv = _n_vertices(k, cfg.depth)
    step = max(1, _CHUNK_CELLS // (nv * max(1, len(roots))))
    bounds = [(a, min(a + step, cfg.samples)) for a in range(0, cfg.samples, step)]
    if cfg.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(lambda b: _mc_block(chain, cfg, k, b[0], b[1], roots, prior),
                                bounds))
    else:
        parts = [_mc_block(chain, cfg, k, a, b, roots, prior) for a, b in bounds]
    vals = np.concatenate(parts, axis=1)
    ww = w[roots][:, None, None]
    if cfg.estimator is Estimator.LEAF_TV:
        s0 = float(np.sum(w * (1.0 - prior)))
        return (ww * vals).sum(axis=0) / s0
    chance = 1.0 / chain.q
    return ((ww * vals).sum(axis=0) - chance) / (1.0 - chance)


# ---------------------------------------------------------------------------
# exact recursion


def _multinomial(combos: np.ndarray, k: int) -> np.ndarray:
    # k! / prod(run lengths!) for sorted index tuples
    coef = np.full(len(combos), float(math.factorial(k)))
    run = np.ones(len(combos))
    for j in range(1, k):
        same = combos[:, j] == combos[:, j - 1]
        run = np.where(same, run + 1, 1.0)
        coef = np.where(same, coef / run, coef)
    return coef


def _exact_statistic(chain: ChainMatrices, cfg: SimConfig, k: int) -> np.ndarray:
    """Exact ``S_d`` for ``d = 0..depth`` by recursion on message distributions.

    ``atoms`` holds the distinct normalised likelihood vectors a subtree of
    the current height can send up, and ``W[s, a]`` their probabilities
    given the subtree root has spin ``s``.
    """
    P, q = chain.P, chain.q
    w, prior = _weights(chain, cfg)
    s0 = float(np.sum(w * (1.0 - prior)))
    atoms = np.eye(q)
    W = np.eye(q)
    stats = [float(w @ (W @ _tv_to_prior(atoms, prior))) / s0]
    for _ in range(cfg.depth):
        n = atoms.shape[0]
        n_combos = math.comb(n + k - 1, k)
        if n_combos > cfg.exact_budget:
            raise BudgetExceeded(
                f"exact recursion needs {n_combos} combinations (budget {cfg.exact_budget})")
        up = _apply(P, atoms)
        up = up / up.sum(axis=1, keepdims=True)
        D = P @ W  # D[s, a]: law of a child's message given parent spin s
        combos = np.array(list(itertools.combinations_with_replacement(range(n), k)),
                          dtype=np.int64)
        coef = _multinomial(combos, k)
        msg = np.prod(up[combos], axis=1)
        msg = msg / msg.sum(axis=1, keepdims=True)
        probs = coef[None, :] * np.prod(D[:, combos], axis=2)
        key = np.round(msg, 12)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        atoms = np.zeros((len(uniq), q))
        np.add.at(atoms, inv, msg)
        mult = np.bincount(inv, minlength=len(uniq))[:, None]
        atoms = atoms / mult
        W = np.zeros((q, len(uniq)))
        for s in range(q):
            np.add.at(W[s], inv, probs[s])
        stats.append(float(w @ (W @ _tv_to_prior(atoms, prior))) / s0)
    return np.array(stats)


def exact_fits(chain: ChainMatrices, depth: int, k: int, budget: int) -> bool:
    """Whether the exact recursion to ``depth`` stays within ``budget`` (upper estimate)."""
    n = chain.q
    for _ in range(depth):
        combos = math.comb(n + k - 1, k)
        if combos > budget:
            return False
        n = combos
    return True


# ---------------------------------------------------------------------------
# estimation and decision


def _aitken(s: np.ndarray):
    a, b, c = s[..., -3], s[..., -2], s[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return c - (c - b) ** 2 / (c - 2 * b + a)


def decide(stat: np.ndarray, se: np.ndarray, diff_se: Optional[np.ndarray] = None,
           limit: Optional[float] = None, limit_se: Optional[float] = None,
           n_sigma: float = 3.0) -> Decision:
    """Turn per-depth values into a decision.

    Parameters
    ----------
    stat, se : ndarray
        Statistic and standard errors for depths ``1..n``.
    diff_se : ndarray, optional
        Standard errors of ``stat[-1] - stat[-2]`` and ``stat[-2] - stat[-3]``.
        Defaults to the root sum of squares of the two standard errors.
    limit, limit_se : float, optional
        Geometric extrapolation of the sequence and its standard error.
    n_sigma : float

    Notes
    -----
    In order of precedence:

    1. ``SignalDecays`` if ``stat[-1] < n_sigma * se[-1]``.
    2. ``SignalPersists`` if ``stat[-1] > n_sigma * se[-1]`` and the last
       three values are non-decreasing up to ``n_sigma`` standard errors of
       their differences.
    3. With a finite, positive ``limit_se``: ``SignalPersists`` if
       ``limit > n_sigma * limit_se``; ``SignalDecays`` if
       ``|limit| <= n_sigma * limit_se`` and
       ``|limit| + n_sigma * limit_se < stat[-1] / 2``, i.e. the limit is
       consistent with zero and resolved well below the current value.
    4. ``Inconclusive`` otherwise.
    """
    stat = np.asarray(stat, dtype=float)
    se = np.asarray(se, dtype=float)
    last, last_se = stat[-1], se[-1]
    if last < n_sigma * last_se or last <= 0.0:
        return Decision.DECAYS
    if stat.size >= 3:
        if diff_se is None:
            diff_se = np.hypot(se[[-1, -2]], se[[-2, -3]])
        d = stat[[-1, -2]] - stat[[-2, -3]]
        if np.all(d >= -n_sigma * np.asarray(diff_se)) and (last_se > 0 or np.all(d >= 0)):
            return Decision.PERSISTS
    if limit is not None and limit_se is not None and np.isfinite(limit) \
            and np.isfinite(limit_se) and limit_se > 0:
        if limit > n_sigma * limit_se:
            return Decision.PERSISTS
        band = n_sigma * limit_se
        if abs(limit) <= band and abs(limit) + band < 0.5 * last:
            return Decision.DECAYS
    return Decision.INCONCLUSIVE


def estimate_reconstruction(chain: ChainMatrices, config: SimConfig,
                            k: Optional[int] = None) -> ReconEstimate:
    """Reconstruction statistic for depths ``1..config.depth``.

    The exact recursion reports zero standard errors and is decided by
    rules 1, 2 and 4 of :func:`decide` only, since its values carry no
    sampling noise to calibrate an extrapolation against.  Monte Carlo
    runs use bootstrap standard errors (resampling whole trees, so the
    depths stay paired) and all four rules.
    """
    k = chain.k if k is None else k
    cfg = config
    cfg.validate(chain.q, k)
    if cfg.method == "exact" and cfg.estimator is not Estimator.LEAF_TV:
        raise DomainError("the exact recursion supports the LeafTV estimator only")
    depths = np.arange(1, cfg.depth + 1)
    use_exact = cfg.estimator is Estimator.LEAF_TV and (
        cfg.method == "exact"
        or (cfg.method == "auto" and exact_fits(chain, cfg.depth, k, cfg.exact_budget)))

    if use_exact:
        stat = np.clip(_exact_statistic(chain, cfg, k)[1:], 0.0, 1.0)
        se = np.zeros_like(stat)
        decision = decide(stat, se, n_sigma=cfg.n_sigma)
        return ReconEstimate(depths, stat, se, "exact", cfg.estimator, decision)

    y = _mc_values(chain, cfg, k)[:, 1:]  # (samples, depth)
    stat = np.clip(y.mean(axis=0), 0.0, 1.0)
    rng = np.random.Generator(np.random.Philox(key=int(cfg.seed) ^ _BOOT_KEY))
    idx = rng.integers(0, cfg.samples, size=(cfg.bootstrap, cfg.samples))
    boot = y[idx].mean(axis=1)  # (B, depth)
    se = boot.std(axis=0, ddof=1)

    diff_se = lim = lim_se = None
    if cfg.depth >= 3:
        diff_se = np.array([(boot[:, -1] - boot[:, -2]).std(ddof=1),
                            (boot[:, -2] - boot[:, -3]).std(ddof=1)])
        den = stat[-2] - stat[-3]
        r = (stat[-1] - stat[-2]) / den if den != 0 else np.nan
        if np.isfinite(r) and 0 < r < 1:
            lim = float(_aitken(y.mean(axis=0)))
            blim = _aitken(boot)
            blim = blim[np.isfinite(blim)]
            lim_se = float(blim.std(ddof=1)) if blim.size > 1 else float("inf")
    decision = decide(stat, se, diff_se, lim, lim_se, cfg.n_sigma)
    return ReconEstimate(depths, stat, se, "mc", cfg.estimator, decision, lim, lim_se)
