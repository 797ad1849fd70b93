"""Tree-indexed Markov chains of the translation-invariant measures.

For the boundary law ``(z,...,z,1,...,1)`` the transition weights are

* inside the first block: ``theta z`` on the diagonal, ``z`` elsewhere;
* first block to second block: ``1``;
* second block to first block: ``z``;
* inside the second block: ``theta`` on the diagonal, ``1`` elsewhere;

with rows of the first block normalised by ``Z1 = (theta+m-1) z + q-m``
and rows of the second by ``Z2 = m z + theta+q-m-1``.  Lumping the two
blocks gives a 2-state ("fuzzy") chain whose effective Ising description
is computed by :func:`ising_lift`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError
from .model import PottsParams, TisgmSolution, f_m, RESIDUAL_TOL


def _partition(params: PottsParams, sol: TisgmSolution):
    t, q, m, z = params.theta, params.q, sol.m, sol.z
    z1 = (t + m - 1) * z + q - m
    z2 = m * z + t + q - m - 1
    return t, q, m, z, z1, z2


def transition_matrix(params: PottsParams, sol: TisgmSolution) -> np.ndarray:
    """The ``q x q`` row-stochastic matrix of the chain.

    Rows in the first block are normalised by ``Z1 = (theta+m-1) z + q-m``,
    rows in the second by ``Z2 = m z + theta+q-m-1``.
    """
    t, q, m, z, z1, z2 = _partition(params, sol)
    P = np.empty((q, q))
    P[:m, :m] = z / z1
    P[:m, m:] = 1.0 / z1
    P[m:, :m] = z / z2
    P[m:, m:] = 1.0 / z2
    idx = np.arange(q)
    P[idx[:m], idx[:m]] = t * z / z1
    P[idx[m:], idx[m:]] = t / z2
    return P


def fuzzy_matrix(params: PottsParams, sol: TisgmSolution) -> np.ndarray:
    """The 2x2 chain obtained by lumping the blocks ``{1..m}`` and ``{m+1..q}``."""
    t, q, m, z, z1, z2 = _partition(params, sol)
    return np.array([
        [(t + m - 1) * z / z1, (q - m) / z1],
        [m * z / z2, (t + q - m - 1) / z2],
    ])


def lump(P: np.ndarray, m: int) -> np.ndarray:
    """Class sums of every row: column 0 sums ``P[:, :m]``, column 1 the rest."""
    return np.stack([P[:, :m].sum(axis=1), P[:, m:].sum(axis=1)], axis=1)


def stationary_2state(p_hat: np.ndarray) -> np.ndarray:
    """Stationary law of a positive 2-state chain, ``(p21, p12)/(p12+p21)``."""
    p12, p21 = p_hat[0, 1], p_hat[1, 0]
    return np.array([p21, p12]) / (p12 + p21)


@dataclass(frozen=True)
class ChainMatrices:
    """Transition data for one solution.

    Attributes
    ----------
    P : ndarray, shape (q, q)
    P_hat : ndarray, shape (2, 2)
    pi : ndarray, shape (q,)
        Stationary distribution of ``P``.
    a, b : float or None
        Within-block eigenvalues of ``P`` (``a`` absent for ``m = 1``,
        ``b`` absent for ``m = q-1``).
    lambda2_hat : float
        Second eigenvalue of ``P_hat``.
    lambda_hat : float
        Largest modulus among the non-unit eigenvalues of ``P``.
    spectrum : tuple of (value, multiplicity)
    """

    q: int
    k: int
    m: int
    theta: float
    z: float
    P: np.ndarray
    P_hat: np.ndarray
    pi: np.ndarray
    a: float | None
    b: float | None
    lambda2_hat: float
    lambda_hat: float
    spectrum: tuple

    def eigenvalue_multiset(self) -> np.ndarray:
        """Closed-form eigenvalues with multiplicity, sorted ascending."""
        vals = []
        for v, mult in self.spectrum:
            vals.extend([v] * mult)
        return np.sort(np.array(vals))


def build_chain(params: PottsParams, sol: TisgmSolution, check: bool = True) -> ChainMatrices:
    """Assemble :class:`ChainMatrices` for ``sol``.

    The spectrum uses the closed forms with ``x = z**(1/k)``:
    ``a = (theta-1) z / Z1``, ``b = (theta-1) x / Z1`` and
    ``lambda2 = (theta - 1 + (1-x) m) z / Z1``.  These rely on
    ``Z1 = x Z2``, i.e. on ``z`` being a fixed point, which is checked
    unless ``check`` is False.
    """
    if sol.q != params.q or sol.k != params.k:
        raise DomainError("solution does not belong to these parameters")
    t, q, m, z, z1, z2 = _partition(params, sol)
    if check:
        resid = abs(f_m(params, m, z) - z)
        if resid > RESIDUAL_TOL * max(1.0, z):
            raise SolverError(f"z={z!r} is not a fixed point (residual {resid:.3e})",
                              residual=resid)
    P = transition_matrix(params, sol)
    P_hat = fuzzy_matrix(params, sol)
    x = sol.x
    a = (t - 1) * z / z1 if m >= 2 else None
    b = (t - 1) * x / z1 if q - m >= 2 else None
    lam2 = (t - 1 + (1 - x) * m) * z / z1

    w = stationary_2state(P_hat)
    pi = np.concatenate([np.full(m, w[0] / m), np.full(q - m, w[1] / (q - m))])

    spectrum = [(1.0, 1), (lam2, 1)]
    if a is not None:
        spectrum.append((a, m - 1))
    if b is not None:
        spectrum.append((b, q - m - 1))
    lam_hat = max(abs(v) for v, _ in spectrum[1:])
    return ChainMatrices(q, params.k, m, t, z, P, P_hat, pi, a, b, lam2, lam_hat,
                         tuple(spectrum))


def verify_fuzzy_projection(chain, m: int | None = None, tol: float = 1e-12) -> tuple:
    """Check that every row of ``P`` lumps onto the matching row of ``P_hat``.

    Parameters
    ----------
    chain : ChainMatrices or tuple of (P, P_hat)
    m : int, optional
        Size of the first class; taken from ``chain`` when omitted.
    tol : float
        Largest deviation accepted.

    Returns
    -------
    (ok, deviation) : (bool, float)
    """
    if isinstance(chain, ChainMatrices):
        P, P_hat, m = chain.P, chain.P_hat, chain.m if m is None else m
    else:
        P, P_hat = chain
        if m is None:
            raise DomainError("m is required when passing raw matrices")
    q = P.shape[0]
    cls = np.array([0] * m + [1] * (q - m))
    dev = float(np.max(np.abs(lump(P, m) - P_hat[cls])))
    return dev <= tol, dev


@dataclass(frozen=True)
class IsingImage:
    """Effective Ising description of the lumped chain.

    Attributes
    ----------
    J_prime : float
        Coupling, ``exp(4 J') = (theta+m-1)(theta+q-m-1) / (m (q-m))``.
    h_prime : float
        Field, ``exp(4 h'/(k+1)) = (theta+m-1) m / ((q-m)(theta+q-m-1)) (z/s)**2``.
    s : float
        Ising boundary law ``(m/(q-m))**(k/(k+1)) z``.
    Q_hat : ndarray
        Unnormalised transfer matrix built from ``(J', h', s)``.
    P_hat_from_ising : ndarray
        Row-normalised ``Q_hat``; equals the lumped chain.
    beyond_half : bool
        True when ``m > q/2``.
    """

    J_prime: float
    h_prime: float
    s: float
    Q_hat: np.ndarray
    P_hat_from_ising: np.ndarray
    beyond_half: bool


def ising_transition(J: float, h: float, s: float, k: int):
    """Unnormalised and normalised 2x2 matrices for an Ising law ``s``."""
    e = 2.0 * h / (k + 1)
    Q = np.array([
        [math.exp(J + e) * s, math.exp(-J)],
        [math.exp(-J) * s, math.exp(J - e)],
    ])
    return Q, Q / Q.sum(axis=1, keepdims=True)


def ising_recursion(J: float, h: float, s: float, k: int) -> float:
    """One step of the homogeneous Ising boundary-law map."""
    e = 2.0 * h / (k + 1)
    num = math.exp(J + e) * s + math.exp(-J)
    den = math.exp(-J) * s + math.exp(J - e)
    return (num / den) ** k


def ising_lift(params: PottsParams, sol: TisgmSolution) -> IsingImage:
    """Coupling, field and boundary law of the lumped two-state model."""
    q, k, t, m, z = params.q, params.k, params.theta, sol.m, sol.z
    if not 1 <= m <= q - 1:
        raise DomainError("block size must satisfy 1 <= m <= q-1")
    J = 0.25 * math.log((t + m - 1) * (t + q - m - 1) / ((q - m) * m))
    ratio = m / (q - m)
    s = ratio ** (k / (k + 1)) * z
    # (z/s)**2 == ratio**(-2k/(k+1)); use the z-free form to avoid roundoff
    log_zs2 = -2.0 * k / (k + 1) * math.log(ratio)
    h = 0.25 * (k + 1) * (math.log((t + m - 1) * m / ((q - m) * (t + q - m - 1))) + log_zs2)
    Q, P = ising_transition(J, h, s, k)
    return IsingImage(J, h, s, Q, P, 2 * m > q)
