"""Bracketed scalar root finding with a final last-ulp polish."""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

from .errors import SolverError

XTOL = 1e-13
MAXITER = 200


def _polish(f: Callable[[float], float], x: float, steps: int = 4) -> float:
    # Walk a few floats either side and keep the one with the smallest |f|.
    best, fbest = x, abs(f(x))
    for direction in (-math.inf, math.inf):
        y = x
        for _ in range(steps):
            y = math.nextafter(y, direction)
            fy = abs(f(y))
            if fy < fbest:
                best, fbest = y, fy
    return best


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = XTOL,
    maxiter: int = MAXITER,
    polish: bool = True,
) -> float:
    """Return a root of ``f`` inside ``[lo, hi]``.

    Brent's method is used on the bracket; the endpoint values must
    differ in sign (or one of them must vanish).

    Raises
    ------
    SolverError
        If the bracket is invalid or the iteration does not converge.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or np.sign(flo) == np.sign(fhi):
        raise SolverError(
            f"no sign change on [{lo!r}, {hi!r}]",
            bracket=(lo, hi),
            residual=float(min(abs(flo), abs(fhi))),
        )
    rtol = 4.0 * np.finfo(float).eps
    x, info = brentq(f, lo, hi, xtol=xtol, rtol=rtol, maxiter=maxiter,
                     full_output=True, disp=False)
    if not info.converged:
        raise SolverError(
            f"Brent iteration did not converge on [{lo!r}, {hi!r}]",
            bracket=(lo, hi),
            residual=float(abs(f(x))),
        )
    return _polish(f, float(x)) if polish else float(x)


def sign_change_brackets(values: np.ndarray, grid: np.ndarray) -> list[tuple[float, float]]:
    """Adjacent grid intervals on which ``values`` changes sign.

    NaN entries are skipped, so a sign change across a NaN gap is not
    reported.
    """
    out = []
    s = np.sign(values)
    for i in range(len(grid) - 1):
        a, b = s[i], s[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            out.append((float(grid[i]), float(grid[i])))
        elif a * b < 0:
            out.append((float(grid[i]), float(grid[i + 1])))
    if len(s) and s[-1] == 0.0:
        out.append((float(grid[-1]), float(grid[-1])))
    return out


def roots_on_grid(
    f: Callable[[float], float], grid: Iterable[float], polish: bool = True
) -> list[float]:
    """All roots of ``f`` detected by sign changes on ``grid``, refined."""
    grid = np.asarray(list(grid), dtype=float)
    with np.errstate(invalid="ignore"):
        values = np.array([f(t) for t in grid], dtype=float)
    roots = []
    for lo, hi in sign_change_brackets(values, grid):
        roots.append(lo if lo == hi else find_root(f, lo, hi, polish=polish))
    return sorted(set(roots))
