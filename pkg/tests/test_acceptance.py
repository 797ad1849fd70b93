"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``RESULTS`` and repeated in the terminal
summary by ``conftest.py``.  Run on its own with
``pytest tests/test_acceptance.py -v``.
"""

import json
import math
import time

import numpy as np
import pytest

from oracles import closed_form_z, count_oracle, potts_chain
from pottstree import (
    BudgetExceeded,
    PottsParams,
    branch_solution,
    build_chain,
    count_extremal_lower_bound,
    critical_thresholds,
    ising_lift,
    solve_boundary_laws,
    theta_m,
    verify_gamma_bounds,
)
from pottstree.cli import main
from pottstree.model import Branch, TisgmSolution
from pottstree.recon import Decision, SimConfig, estimate_reconstruction
from pottstree.scan import scan
from pottstree.thresholds import gamma1, gamma2, xi1, xi2

SQ2 = math.sqrt(2.0)
RESULTS: dict = {}


def record(key, title, ok, detail):
    line = f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[key] = line
    print(line)
    assert ok, line


def note(key, title, detail):
    # an outcome that is reported but by definition not a failure
    line = f"criterion {key:<3} NOTE  {title}: {detail}"
    RESULTS[key] = line
    print(line)


def random_tuples(n, seed, qmax=12, free=True):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        q = int(rng.integers(2, qmax + 1))
        m = int(rng.integers(1, q))
        branch = rng.choice(["free", "z1", "z2"] if free else ["z1", "z2"])
        if branch == "free":
            theta = float(1 + 40 * rng.random() + 1e-3)
            sol = TisgmSolution(q, 2, m, Branch.FREE, 1.0)
        else:
            theta = float(theta_m(q, m) + 1e-6 + 40 * rng.random())
            sol = branch_solution(PottsParams(q, 2, theta), m, str(branch))
        out.append((PottsParams(q, 2, theta), sol))
    return out


# ---------------------------------------------------------------- 1

def test_c1_closed_form_and_numeric_solver_agree():
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    for q in range(3, 13):
        for m in range(1, q):
            tm = theta_m(q, m)
            for theta in np.linspace(tm, tm + 60.0, 1001)[1:]:
                p = PottsParams(q, 2, float(theta))
                want = closed_form_z(float(theta), q, m)
                got = {s.branch: s.z for s in solve_boundary_laws(p, m, method="numeric")}
                for br, zc in zip((Branch.Z1, Branch.Z2), want):
                    if abs(zc - 1.0) <= 1e-12:  # absorbed by the free law
                        continue
                    worst = max(worst, abs(got[br] - zc) / zc)
                    n += 1
    dt = time.perf_counter() - t0
    record("1", "solver agreement", worst < 1e-10 and dt < 10.0,
           f"max rel diff {worst:.2e} (tol 1e-10) over {n} roots in {dt:.1f}s (limit 10s)")


# ---------------------------------------------------------------- 2

def test_c2_counts(capsys):
    t0 = time.perf_counter()
    bad, n = [], 0
    for q in range(3, 11):
        ths = [theta_m(q, m) for m in range(1, q // 2 + 1)]
        points = [1.5, float(q + 1), ths[-1] + 3.0] + ths
        points += [0.5 * (a + b) for a, b in zip(ths, ths[1:])]
        for theta in points:
            main(["counts", "--q", str(q), "--theta", repr(theta), "--json"])
            got = json.loads(capsys.readouterr().out)["count"]
            n += 1
            if got != count_oracle(q, theta):
                bad.append((q, theta, got))
    dt = time.perf_counter() - t0
    record("2", "measure counts", not bad and dt < 1.0,
           f"{n - len(bad)}/{n} exact matches in {dt:.2f}s (limit 1s){' ' + str(bad) if bad else ''}")


# ---------------------------------------------------------------- 3

def test_c3_spectrum():
    t0 = time.perf_counter()
    worst = 0.0
    for params, sol in random_tuples(500, 3):
        q, m, t, z = params.q, sol.m, params.theta, sol.z
        P = potts_chain(t, q, m, z)
        x = math.sqrt(z)
        z1 = (t + m - 1) * z + q - m
        lumped = np.stack([P[:, :m].sum(1), P[:, m:].sum(1)], axis=1)[[0, m]]
        lam2 = np.trace(lumped) - 1.0
        want = [1.0] + [(t - 1) * z / z1] * (m - 1) + [(t - 1) * x / z1] * (q - m - 1) + [lam2]
        got = np.sort(np.real(np.linalg.eigvals(P)))
        worst = max(worst, float(np.max(np.abs(got - np.sort(want)))))
        ch = build_chain(params, sol)
        listed = sorted(v for v, mult in ch.spectrum for _ in range(mult))
        worst = max(worst, float(np.max(np.abs(np.array(listed) - np.sort(want)))))
    dt = time.perf_counter() - t0
    record("3", "spectrum", worst < 1e-10 and dt < 30.0,
           f"max |eig - closed form| {worst:.2e} (tol 1e-10) in {dt:.1f}s (limit 30s)")


# ---------------------------------------------------------------- 4

def test_c4_ising_lift():
    proj = indep = h_err = 0.0
    h_flag_ok = True
    for params, sol in random_tuples(500, 4, free=False):
        q, m = params.q, sol.m
        img = ising_lift(params, sol)
        P = potts_chain(params.theta, q, m, sol.z)
        lumped = np.stack([P[:, :m].sum(1), P[:, m:].sum(1)], axis=1)[[0, m]]
        proj = max(proj, float(np.max(np.abs(img.P_hat_from_ising - lumped))))
        other = branch_solution(params, m, "z2" if sol.branch is Branch.Z1 else "z1")
        img2 = ising_lift(params, other)
        indep = max(indep, abs(img.J_prime - img2.J_prime), abs(img.h_prime - img2.h_prime))
        if 2 * m == q:
            h_err = max(h_err, abs(img.h_prime))
        elif abs(img.h_prime) <= 1e-12:
            h_flag_ok = False
    ok = proj <= 1e-12 and indep <= 1e-11 and h_err <= 1e-12 and h_flag_ok
    record("4", "Ising lift", ok,
           f"projection {proj:.1e} (tol 1e-12), branch independence {indep:.1e} (tol 1e-11), "
           f"|h'| at 2m=q {h_err:.1e} (tol 1e-12), h'!=0 elsewhere: {h_flag_ok}")


# ---------------------------------------------------------------- 5

def test_c5_threshold_values():
    t0 = time.perf_counter()
    t3 = critical_thresholds(PottsParams(3, 2, 4.0), 1)
    t7 = critical_thresholds(PottsParams(7, 2, 8.0), 1)
    t6 = critical_thresholds(PottsParams(6, 2, 7.0), 2)
    checks = {
        "theta** (q=3)": (t3.theta_double_star, 4.2277, 5e-4),
        "theta*-theta** (q=3)": (t3.theta_star - t3.theta_double_star, 2.0149, 5e-4),
        "theta_hat-theta_1 (q=7)": (t7.theta_hat - t7.theta_m, 0.00051, 5e-5),
        "theta_breve (q=6,m=2)": (t6.theta_breve, 7.25, 5e-2),
        "theta_grave (q=6,m=2)": (t6.theta_grave, 7.0, 0.0),
        "theta_hat (q=6,m=2)": (t6.theta_hat, 6 * SQ2 - 1, 1e-12),
    }
    bad = [k for k, (v, w, tol) in checks.items() if not abs(v - w) <= tol]
    dt = time.perf_counter() - t0
    detail = ", ".join(f"{k}={v:.6g}" for k, (v, _, _) in checks.items())
    record("5", "threshold values", not bad and dt < 5.0,
           f"{detail}; off: {bad or 'none'}; {dt:.2f}s (limit 5s)")


# ---------------------------------------------------------------- 6

def _transitions(rows):
    by_curve = {}
    for r in rows:
        if r.row_type == "point":
            by_curve.setdefault((r.m, r.branch), []).append(r)
    out = []
    for key, seq in by_curve.items():
        for a, b in zip(seq, seq[1:]):
            if a.verdict != b.verdict:
                out.append((key, a.theta, b.theta, a.verdict, b.verdict))
    return by_curve, out


def _markers(q, m):
    vals = {}
    for mm in {1, m}:
        for name, v in critical_thresholds(PottsParams(q, 2, q + 1.0), mm).named_values().items():
            vals[f"{name}[m={mm}]"] = v
    return vals


@pytest.mark.parametrize("q,m,tmax", [(3, 1, 15.0), (6, 2, 25.0), (16, 2, 60.0)])
def test_c6_transitions_at_thresholds(q, m, tmax):
    rows = scan(q, 2, 1.5, tmax, 1000, ms=[m], markers=False)
    step = (tmax - 1.5) / 999
    marks = _markers(q, m)
    curves, trans = _transitions(rows)
    unexplained = []
    for key, lo, hi, va, vb in trans:
        near = [n for n, v in marks.items() if lo - step <= v <= hi + step]
        if not near:
            unexplained.append((key, round(lo, 4), va, vb))
    pattern_ok, pattern = True, ""
    if (q, m) == (3, 1):
        z2 = curves[(1, "z2")]
        pattern_ok = all(r.verdict == "Extreme(MSW)" for r in z2)
        pattern = f"; Z2 extreme on all {len(z2)} points from theta_1: {pattern_ok}"
    if (q, m) == (16, 2):
        z2 = [r for r in curves[(2, "z2")] if r.theta > theta_m(q, m)]
        pattern_ok = all(r.verdict == "NonExtreme(KS)" for r in z2)
        pattern = f"; Z2 non-extreme on all {len(z2)} points above theta_2: {pattern_ok}"
    record(f"6{'abc'[[3, 6, 16].index(q)]}", f"transitions q={q} m={m}",
           not unexplained and pattern_ok,
           f"{len(trans)} transitions, all within one step ({step:.4f}) of a threshold: "
           f"{not unexplained}{' ' + str(unexplained) if unexplained else ''}{pattern}")


def test_c6_extremal_count_near_critical():
    lines, ok = [], True
    for q in (3, 4, 5):
        need = 2 ** (q - 1) + q
        for delta in (1e-2, 1e-3, -1e-3, -1e-2):
            got = count_extremal_lower_bound(PottsParams(q, 2, q + 1.0 + delta))
            ok &= got >= need
            lines.append(f"q={q} d={delta:+g}: {got}>={need}" + ("" if got >= need else " NO"))
    record("6d", "extremal count near theta_c", ok, "; ".join(lines))


# ---------------------------------------------------------------- 7

def test_c7_gamma_bounds():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    k13_bad, k24_bad, n_above = [], [], 0
    for i in range(50):
        q = int(rng.integers(2, 13))
        m = int(rng.integers(1, q))
        br = str(rng.choice(["z1", "z2"]))
        theta = float(theta_m(q, m) + 1e-6 + 30 * rng.random())
        p = PottsParams(q, 2, theta)
        chk = verify_gamma_bounds(p, branch_solution(p, m, br), grid_resolution=200)
        r = (theta - 1) / (theta + 1)
        if max(chk.k_max[0], chk.k_max[2]) > r + 1e-9:
            k13_bad.append(i)
        if max(chk.k_max[1], chk.k_max[3]) > r + 1 - chk.z + 1e-9:
            k24_bad.append((i, round(chk.z, 4)))
        n_above += chk.z > 1
    dt = time.perf_counter() - t0
    record("7", "gamma bounds", not k13_bad and not k24_bad and dt < 60.0,
           f"K1,K3 over (theta-1)/(theta+1): {len(k13_bad)}/50; K2,K4 over "
           f"(theta-1)/(theta+1)+1-z: {len(k24_bad)}/50 (all with z>1: "
           f"{all(z > 1 for _, z in k24_bad)}; {n_above} tuples have z>1); {dt:.1f}s (limit 60s)")


# ---------------------------------------------------------------- 8

def test_c8_monotonicity():
    bad = []
    for q, m in [(3, 1), (4, 1), (6, 2), (8, 3), (12, 2), (16, 2), (20, 1)]:
        tm = theta_m(q, m)
        lower = np.linspace(tm, q + 1, 10_000)
        wide = np.linspace(tm, tm + 10 * q, 10_000)
        if not np.all(np.diff(gamma1(lower, q, m)) < 0):
            bad.append(f"gamma1 q={q} m={m}")
        if not np.all(np.diff(gamma2(wide, q, m)) > 0):
            bad.append(f"gamma2 q={q} m={m}")
        if not np.all(np.diff(xi1(wide, q, m)) > 0):
            bad.append(f"xi1 q={q} m={m}")
        if m == 1 and not np.all(np.diff(xi2(wide, q)) < 0):
            bad.append(f"xi2 q={q}")
    record("8", "monotonicity", not bad, f"violations: {bad or 'none'} (10^4 points each)")


# ---------------------------------------------------------------- 9

def _free(theta):
    p = PottsParams(3, 2, theta)
    return build_chain(p, TisgmSolution(3, 2, 1, Branch.FREE, 1.0))


def _directional(key, theta, want):
    t0 = time.perf_counter()
    est = estimate_reconstruction(_free(theta), SimConfig(depth=8, samples=10_000, seed=42))
    dt = time.perf_counter() - t0
    detail = (f"theta={theta} depth 8, 10^4 samples, seed 42 -> {est.decision.value} "
              f"(S_8={est.statistic[-1]:.4f} +- {est.stderr[-1]:.4f}); {dt:.1f}s (limit 120s)")
    if est.decision is Decision.INCONCLUSIVE and dt < 120.0:
        note(key, "simulation direction (inconclusive, recorded)", detail)
        return
    record(key, "simulation direction", est.decision is want and dt < 120.0, detail)


def test_c9_persists_above_ks_threshold():
    _directional("9a", 9.0, Decision.PERSISTS)


def test_c9_decays_in_uniqueness_regime():
    _directional("9b", 3.0, Decision.DECAYS)


def test_c9_exact_vs_mc():
    p = PottsParams(3, 2, 4.0)
    ch = build_chain(p, branch_solution(p, 1, "z1"))
    lines, ok = [], True
    for depth in range(1, 7):
        try:
            exact = estimate_reconstruction(ch, SimConfig(depth=depth, method="exact"))
        except BudgetExceeded as exc:
            ok = False
            lines.append(f"depth {depth}: exact recursion unavailable ({exc})")
            continue
        mc = estimate_reconstruction(ch, SimConfig(depth=depth, method="mc", seed=42))
        dev = abs(mc.statistic[-1] - exact.statistic[-1])
        good = dev <= 3 * mc.stderr[-1]
        ok &= good
        lines.append(f"depth {depth}: |mc-exact|={dev:.4f} {'<=' if good else '>'} "
                     f"3*{mc.stderr[-1]:.4f}")
    record("9c", "exact vs Monte Carlo", ok, "; ".join(lines))


# ---------------------------------------------------------------- 10

def _cli_bytes(capsys, tmp_path, name, argv):
    path = tmp_path / name
    rc = main(argv + ["--out", str(path)])
    capsys.readouterr()
    assert rc == 0
    return path.read_bytes()


def test_c10_determinism(capsys, tmp_path):
    scan_args = ["scan", "--q", "6", "--theta-min", "1.5", "--theta-max", "25", "--steps", "300"]
    sim_args = ["simulate", "--q", "3", "--theta", "9", "--depth", "8", "--samples", "2000",
                "--seed", "42", "--method", "mc"]
    s = [_cli_bytes(capsys, tmp_path, f"scan{i}.csv", scan_args + ["--workers", w])
         for i, w in enumerate(("1", "1", "4"))]
    m = [_cli_bytes(capsys, tmp_path, f"sim{i}.csv", sim_args + ["--workers", w])
         for i, w in enumerate(("1", "1", "4"))]
    ok = s[0] == s[1] == s[2] and m[0] == m[1] == m[2]
    record("10", "determinism", ok,
           f"scan identical across runs/workers: {s[0] == s[1] == s[2]}; "
           f"simulate identical across runs/workers: {m[0] == m[1] == m[2]}")
