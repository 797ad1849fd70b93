"""Temperature scans over every branch, with threshold marker rows."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError
from .extremality import classify
from .model import Branch, PottsParams, TisgmSolution, solve_boundary_laws
from .thresholds import critical_thresholds

SCHEMA_VERSION = "1"
_BRANCH_RANK = {"free": 0, "z1": 1, "z2": 2, "threshold": 3}


@dataclass(frozen=True)
class ScanRow:
    """One output row.

    Point rows carry a measure at one ``theta``; threshold rows
    (``row_type == "threshold"``) carry a named critical temperature in
    ``theta`` and leave the measure columns empty.  The free measure is
    reported with ``m = 0``.
    """

    schema_version: str
    row_type: str
    q: int
    k: int
    m: int
    branch: str
    theta: float
    z: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    lambda2_hat: Optional[float] = None
    lambda_hat: Optional[float] = None
    ks_value: Optional[float] = None
    martin_value: Optional[float] = None
    kappa: Optional[float] = None
    gamma_bound: Optional[float] = None
    msw_value: Optional[float] = None
    verdict: str = ""
    fuzzy_verdict: str = ""
    region_annotation: str = ""
    marker: str = ""

    def sort_key(self) -> tuple:
        return (self.m, _BRANCH_RANK[self.branch], self.theta, self.marker)


COLUMNS = tuple(f.name for f in fields(ScanRow))


def point_row(params: PottsParams, sol: TisgmSolution, paper_exact: bool = False,
              thresholds=None) -> ScanRow:
    """Classify ``sol`` and flatten the result into a :class:`ScanRow`."""
    v = classify(params, sol, paper_exact, thresholds)
    ch = v.chain
    free = sol.branch is Branch.FREE
    return ScanRow(
        SCHEMA_VERSION, "point", params.q, params.k, 0 if free else sol.m,
        sol.branch.value, float(params.theta), float(sol.z), ch.a, ch.b,
        float(ch.lambda2_hat), float(ch.lambda_hat), float(v.ks_value),
        float(v.martin_value), float(v.kappa), float(v.gamma_bound), float(v.msw_value),
        v.verdict.value, v.fuzzy_verdict.value if v.fuzzy_verdict else "", v.region,
    )


def _rows_at(args) -> list:
    q, k, theta, ms, branches, paper_exact, th = args
    params = PottsParams(q, k, float(theta))
    rows = []
    if "free" in branches:
        free = TisgmSolution(q, k, 1, Branch.FREE, 1.0)
        rows.append(point_row(params, free, paper_exact, th.get(1)))
    for m in ms:
        for sol in solve_boundary_laws(params, m):
            if sol.branch is Branch.FREE or sol.branch.value not in branches:
                continue
            rows.append(point_row(params, sol, paper_exact, th.get(min(m, q - m))))
    return rows


def _all_thresholds(q: int, k: int, ms: Iterable[int]) -> dict:
    # thresholds do not depend on theta; computed once per canonical block
    if k != 2:
        return {}
    params = PottsParams(q, k, float(q + 1))
    return {mc: critical_thresholds(params, mc) for mc in sorted({1} | {min(m, q - m) for m in ms})}


def threshold_rows(q: int, k: int, theta_min: float, theta_max: float,
                   ms: Iterable[int]) -> list:
    """Marker rows for every threshold of the canonical blocks in ``ms``."""
    params = PottsParams(q, k, float(q + 1))
    rows = []
    for mc in sorted({min(m, q - m) for m in ms}):
        for name, value in critical_thresholds(params, mc).named_values().items():
            if theta_min <= value <= theta_max:
                rows.append(ScanRow(SCHEMA_VERSION, "threshold", q, k, mc, "threshold",
                                    float(value), marker=name))
    return rows


def scan(q: int, k: int, theta_min: float, theta_max: float, steps: int,
         ms: Optional[Sequence[int]] = None, branches: Sequence[str] = ("free", "z1", "z2"),
         paper_exact: bool = False, markers: bool = True, workers: int = 1) -> list:
    """Classify every measure on an evenly spaced ``theta`` grid.

    Parameters
    ----------
    q, k : int
    theta_min, theta_max : float
        Grid end points, ``1 < theta_min <= theta_max``.
    steps : int
        Number of grid points.
    ms : sequence of int, optional
        Block sizes to include; all of ``1..q-1`` by default.
    branches : sequence of {"free", "z1", "z2"}
    paper_exact : bool
        Forwarded to :func:`classify`.
    markers : bool
        Append threshold marker rows.
    workers : int
        Processes used for the grid; the output does not depend on it.

    Returns
    -------
    list of ScanRow
        Sorted by ``(m, branch, theta)``.
    """
    if not theta_min > 1.0:
        raise DomainError("theta_min must exceed 1")
    if theta_max < theta_min:
        raise DomainError("theta_max must be at least theta_min")
    if steps < 1:
        raise DomainError("steps must be positive")
    PottsParams(q, k, theta_min)  # validates q and k
    ms = list(range(1, q)) if ms is None else [int(m) for m in ms]
    for m in ms:
        if not 1 <= m <= q - 1:
            raise DomainError(f"block size {m} outside 1..{q - 1}")
    branches = tuple(Branch.parse(b).value for b in branches)
    grid = np.linspace(theta_min, theta_max, steps)
    th = _all_thresholds(q, k, ms)
    tasks = [(q, k, float(t), ms, branches, paper_exact, th) for t in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_rows_at, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        parts = [_rows_at(t) for t in tasks]
    rows = [r for part in parts for r in part]
    if markers and k == 2:
        rows.extend(threshold_rows(q, k, theta_min, theta_max, ms))
    rows.sort(key=ScanRow.sort_key)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def to_csv(rows: Sequence, columns: Sequence[str]) -> str:
    """RFC 4180 text with LF line endings and 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = r if isinstance(r, dict) else asdict(r)
        w.writerow([_fmt(d.get(c)) for c in columns])
    return buf.getvalue()


def to_jsonl(rows: Sequence, columns: Sequence[str]) -> str:
    """One JSON object per line; non-finite numbers become ``null``."""
    out = []
    for r in rows:
        d = r if isinstance(r, dict) else asdict(r)
        obj = {}
        for c in columns:
            v = d.get(c)
            if isinstance(v, (np.integer,)):
                v = int(v)
            elif isinstance(v, (float, np.floating)):
                v = float(v) if math.isfinite(v) else None
            obj[c] = v
        out.append(json.dumps(obj, separators=(",", ":")))
    return "".join(line + "\n" for line in out)
