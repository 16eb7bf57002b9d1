"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are echoed to stdout and collected in the "acceptance criteria"
section of the pytest terminal summary.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from qexpand.channel import (
    build_ensemble,
    eigen_cloud,
    esd,
    kolmogorov_distance,
    rho_d,
    s2_of_power,
    second_singular,
    sigma_d,
)
from qexpand.cli import run
from qexpand.linalg import theta_basis
from qexpand.montecarlo import mc_moment
from qexpand.sd_engine import (
    default_depth,
    expand_paths,
    pattern_classes,
    rung_identity_residual,
    sd_children,
    sd_value,
)
from qexpand.walks_bounds import (
    ab_lower_power,
    ab_lower_s2,
    brute_force_counts,
    km_channel_cdf,
    km_mass,
    walk_counts,
)
from qexpand.word_core import enumerate_minimal, minimal_writing, parse_kword


def record(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def kw(text):
    return parse_kword(text, 10)


# 1 ---------------------------------------------------------------------------


def test_criterion_1_rung_pair_is_one():
    worst_t, values = 0.0, []
    for N in (2, 4, 8, 16, 32):
        t0 = time.perf_counter()
        v = sd_value(kw("1 | -1"), N, "exact").value
        worst_t = max(worst_t, time.perf_counter() - t0)
        values.append(v)
    ok = all(v == 1 and isinstance(v, Fraction) for v in values) and worst_t < 1.0
    assert record(1, ok, f"values={[str(v) for v in values]} slowest={worst_t:.3f}s")


# 2 ---------------------------------------------------------------------------


def test_criterion_2_classical_moment():
    parts, ok = [], True
    for N in (2, 4, 8):
        v = sd_value(kw("1 1 | -1 -1"), N, "exact").value
        est = mc_moment(kw("1 1 | -1 -1"), N, 1_000_000, seed=N)
        z = abs(est.mean - 2) / est.stderr
        ok &= v == 2 and z <= 4
        parts.append(f"N={N}: exact={v} mc={est.mean.real:.4f}+-{est.stderr:.4f} z={z:.2f}")
    assert record(2, ok, "; ".join(parts))


# 3 ---------------------------------------------------------------------------


def _random_kword(rng):
    while True:
        d = rng.randint(1, 3)
        traces = []
        for _ in range(rng.randint(1, 3)):
            raw = [rng.choice([1, -1]) * rng.randint(1, d) for _ in range(rng.randint(1, 6))]
            t = minimal_writing(tuple(raw))
            if t:
                traces.append(t)
        if traces and sum(map(len, traces)) <= 6:
            return tuple(traces)


def test_criterion_3_one_step_identity():
    rng = random.Random(2024)
    bad, checked = [], 0
    for _ in range(50):
        w = _random_kword(rng)
        for N in (8, 16):
            lhs = sd_value(w, N, "exact").value
            rhs = Fraction(0)
            for c in sd_children(w):
                coef = c.sign * Fraction(N) ** (c.trivial_count - 1)
                rhs += coef * (sd_value(c.kword, N, "exact").value if c.kword else 1)
            checked += 1
            if lhs != rhs:
                bad.append((w, N))
    assert record(3, not bad, f"{checked} exact comparisons, {len(bad)} mismatches")


# 4 ---------------------------------------------------------------------------


def test_criterion_4_rung_identity():
    N, t0 = 16, time.perf_counter()
    words = viol = 0
    worst = 0.0
    for L in range(1, 7):
        depth = default_depth(2 * L, N, 1e-3)
        for s in enumerate_minimal(L, 2, "all"):
            rep = rung_identity_residual(s, N, depth)
            words += 1
            worst = max(worst, rep.residual)
            viol += not rep.ok
    elapsed = time.perf_counter() - t0
    ok = viol == 0 and elapsed < 600
    assert record(4, ok, f"{words} words, {viol} violations, max residual={worst:.2e}, {elapsed:.0f}s")


# 5 ---------------------------------------------------------------------------


class ClassSizeBoundViolated(AssertionError):
    pass


@pytest.mark.xfail(
    raises=ClassSizeBoundViolated,
    strict=True,
    reason="|[S]_P| <= d^(m/2) fails literally, e.g. (1,1) and (-1,-1) share a class at d = 1",
)
def test_criterion_5_counting_bounds():
    depth = 3
    # |F_n| <= (m-1)^n and |e| <= N^(k - 2n/3) on single traces and conjugate pairs
    f_viol = e_viol = 0
    for m in range(1, 7):
        for s in enumerate_minimal(m, 3):
            for w in ((s,), (s, tuple(-c for c in reversed(s)))):
                M = sum(map(len, w))
                led = expand_paths(w, depth)
                for n, paths in led.finishing.items():
                    f_viol += len(paths) > (M - 1) ** n
                    e_viol += sum(3 * (p.power - n) > 3 * len(w) - 2 * n for p in paths)
    # classes [S]_P of conjugate pairs
    size_viol = count_viol = signed_viol = 0
    worst = None
    for m in range(1, 7):
        for d in (1, 2, 3):
            c = pattern_classes(m, d, depth)
            for (n, _), _, size in c.class_sizes():
                if size > d ** (m / 2):
                    size_viol += 1
                    if worst is None or size / d ** (m / 2) > worst[0]:
                        worst = (size / d ** (m / 2), m, d, size)
            count_viol += sum(len(h) > (2 * m) ** (2 * n) for (n, _), h in c.classes.items())
            fixed = pattern_classes(m, d, depth, fix_signs=True)
            signed_viol += sum(size > d ** (m / 2) + 1e-9 for _, _, size in fixed.class_sizes())
    ok = f_viol == e_viol == size_viol == count_viol == 0
    record(
        5,
        ok,
        f"|F_n| viol={f_viol}, exponent viol={e_viol}, class count viol={count_viol}, "
        f"class size viol={size_viol}"
        + (f" (worst m={worst[1]} d={worst[2]}: {worst[3]} > {worst[2] ** (worst[1] / 2):.3g})" if worst else "")
        + f"; with sign sequences fixed: {signed_viol} viol",
    )
    assert f_viol == e_viol == count_viol == 0
    assert signed_viol == 0
    if size_viol:
        raise ClassSizeBoundViolated(f"{size_viol} classes exceed d^(m/2)")


# 6 ---------------------------------------------------------------------------


def test_criterion_6_walk_counts():
    brute_ok = all(
        walk_counts(p, d).counts[p] == brute_force_counts(p, d) for d in (2, 3) for p in range(0, 6)
    )
    sum_ok = all(
        sum(walk_counts(20, d).counts[p]) == d ** (2 * p) for d in (2, 3, 4, 5) for p in range(0, 21)
    )
    bound_ok = True
    for d in (2, 3, 4, 5):
        t = walk_counts(10, d)
        for p in range(0, 11):
            for q in range(0, p + 1):
                bound_ok &= t.N(p, q) <= 2 ** (2 * p) * (d - 1) ** (p + q)
    n202 = walk_counts(2, 2).N(2, 0)
    ok = brute_ok and sum_ok and bound_ok and n202 == 6
    assert record(6, ok, f"dp=brute {brute_ok}, row sums {sum_ok}, upper bound {bound_ok}, N(2,0,2)={n202}")


# 7 ---------------------------------------------------------------------------


def test_criterion_7_certified_lower_bounds():
    grid = [(N, d) for N in (16, 32, 64) for d in (2, 3, 4)]
    viol, checked_power, worst = 0, 0, math.inf
    for i in range(20):
        N, d = grid[i % len(grid)]
        E = build_ensemble(N, d, seed=100 + i)
        # Ritz values approach s2 from below, so a pass here is conservative
        s2 = second_singular(E, tol=1e-6)
        lo = ab_lower_s2(N, d).value
        worst = min(worst, s2 - lo)
        viol += s2 < lo
        pw = ab_lower_power(N, d)
        m = pw.extra["m"]
        if m >= 1:
            sp = s2_of_power(E, m, tol=1e-6)
            checked_power += 1
            viol += sp < pw.value
    ok = viol == 0
    assert record(7, ok, f"20 ensembles, {viol} violations, min s2 - bound={worst:.3f}, power checks={checked_power}")


# 8 ---------------------------------------------------------------------------


def test_criterion_8_expander_convergence():
    vals, slowest = [], 0.0
    for seed in range(10):
        t0 = time.perf_counter()
        vals.append(second_singular(build_ensemble(64, 4, seed), tol=1e-8))
        slowest = max(slowest, time.perf_counter() - t0)
    mean = float(np.mean(vals))
    lo, hi = 0.9 * sigma_d(4), 1.1 * sigma_d(4)
    ok = lo <= mean <= hi and slowest < 120
    assert record(8, ok, f"mean s2={mean:.4f} in [{lo:.3f}, {hi:.3f}], slowest run {slowest:.1f}s")


# 9 ---------------------------------------------------------------------------


def test_criterion_9_spectral_structure():
    E = build_ensemble(24, 4, seed=0)
    res = eigen_cloud(E)
    vals = res.eigenvalues
    near_one = int(np.sum(np.abs(vals - 1) < 1e-8))
    others = vals[np.abs(vals - 1) >= 1e-8]
    inside = bool(np.all(np.abs(others) < 1))
    tr_ok = res.diagnostics["trace_error"] <= 1e-8 and res.diagnostics["trace2_error"] <= 1e-8
    soft = float(np.mean(np.abs(others) <= 1.25 * rho_d(4)))
    ok = near_one == 1 and inside and tr_ok
    assert record(
        9,
        ok,
        f"eigenvalues near 1: {near_one}, max other |z|={np.max(np.abs(others)):.4f}, "
        f"trace errors={res.diagnostics['trace_error']:.1e}/{res.diagnostics['trace2_error']:.1e}, "
        f"soft: {soft:.3f} within 1.25 rho_4",
    )


# 10 --------------------------------------------------------------------------


def test_criterion_10_kesten_mckay_fit():
    E = build_ensemble(40, 10, seed=0)
    e = esd(eigen_cloud(E, hermitian=True))
    dist = kolmogorov_distance(e.values, lambda t: km_channel_cdf(t, 10))
    mass = km_mass(20)
    ok = dist <= 0.08 and abs(mass - 1) <= 1e-6
    assert record(10, ok, f"Kolmogorov distance={dist:.4f} (<= 0.08), KM mass={mass:.9f}")


# 11 --------------------------------------------------------------------------


def test_criterion_11_theta_identities():
    worst = 0.0
    for N in (1, 2, 5, 8):
        T = theta_basis(N)
        g = np.random.default_rng(N)
        for _ in range(100):
            X = g.standard_normal((N, N)) + 1j * g.standard_normal((N, N))
            Y = g.standard_normal((N, N)) + 1j * g.standard_normal((N, N))
            errs = [
                abs(sum(np.trace(X @ t @ t) for t in T) - N * np.trace(X)),
                abs(sum(np.trace(X @ t @ Y @ t) for t in T) - np.trace(X) * np.trace(Y)),
                abs(sum(np.trace(X @ t) * np.trace(Y @ t) for t in T) - np.trace(X @ Y)),
            ]
            worst = max(worst, *errs)
    assert record(11, worst <= 1e-10, f"400 draws, max abs error={worst:.2e}")


# 12 --------------------------------------------------------------------------


def test_criterion_12_reproducibility(tmp_path):
    commands = [
        ["spectrum", "--n", "5", "--d", "3", "--seed", "4"],
        ["gap", "--n", "8", "--d", "3", "--seed", "1", "--seeds", "2"],
        ["sd", "--word", "1 2 -1 -2 | 2 1 -2 -1", "--n", "8"],
        ["sd", "--word", "1 2 | -2 -1", "--n", "16", "--mode", "series"],
        ["walks", "--d", "3", "--pmax", "6"],
        ["bounds", "--n", "64", "--d", "4"],
        ["density", "--d", "4", "--points", "21"],
        ["mc-check", "--n", "4", "--trials", "300", "--seed", "3"],
    ]
    same = 0
    for i, argv in enumerate(commands):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{i}_{rep}.out"
            assert run([*argv, "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same += outs[0] == outs[1]
    assert record(12, same == len(commands), f"{same}/{len(commands)} commands byte-identical")
