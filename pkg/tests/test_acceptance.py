"""Full-size acceptance criteria, one PASS/FAIL line each (printed in the terminal summary).

Every criterion uses master seed 1.  Run alone with ``pytest -m acceptance -s``.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

import conftest
from cauchylat import cli
from cauchylat.counting import Square, brute_force_count, count_points
from cauchylat.geodesic_process import (
    fundamental_domain_coordinates,
    index_set_I_tilde,
    l_of,
    fundamental_index_h,
    orbit_norms_batch,
)
from cauchylat.lattice_core import Basis2, Vec2, apply_flow, canonical_batch, num, reduce_batch, reduce_with_transform
from cauchylat.sampling import (
    RngStream,
    sample_haar_batch,
    sample_haar_lattice,
    sample_translation,
    siegel_ball_count,
)
from cauchylat.selftest import random_sl2z
from cauchylat.stats import (
    POISSON_INTENSITY_D,
    cauchy_verdict,
    ecf_log_slope,
    hill_tail_index,
    pair_correlation_check,
    poisson_battery,
)

pytestmark = pytest.mark.acceptance

SEED = 1
E10 = math.exp(10)


def record(number, title, ok, detail, t0):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail} ({time.perf_counter() - t0:.0f}s)"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def battery_detail(v):
    return (
        f"sign p={v.symmetry_p:.3g}, ecf R2={v.ecf_r2:.4f}, hill={v.hill_alpha:.3f}, "
        f"stability p={v.stability_p:.3g}"
    )


# ---------------------------------------------------------------- 1, 2


def test_c1_tail_constant():
    t0 = time.perf_counter()
    cfg = cli.build_config("tail-law", {}, {"seed": SEED, "samples": 1_000_000})
    rep = cli.run_tail_law(cfg)
    zs = ", ".join(f"a={r[0]:g} p={r[3]:.5f} vs {r[4]:.5f} z={r[6]:+.2f}" for r in rep.records)
    assert record(1, "tail law 3/(pi a)", rep.passed(), zs, t0)


def test_c2_siegel_mean():
    t0 = time.perf_counter()
    counts = np.concatenate(
        [siegel_ball_count(sample_haar_batch(SEED, range(s, s + 100_000)), 0.5) for s in range(0, 1_000_000, 100_000)]
    )
    target = 6 / math.pi**2 * math.pi / 4
    se = counts.std() / math.sqrt(counts.size)
    z = (counts.mean() - target) / se
    ok = abs(z) <= 3
    assert record(2, "Siegel mean", ok, f"mean={counts.mean():.6f} target={target:.6f} z={z:+.2f}", t0)


# ---------------------------------------------------------------- 3


def _bounded_skewed_bases(rng, n, bound=20.0):
    out = []
    i = 0
    while len(out) < n:
        R = sample_haar_lattice(RngStream(SEED, i)).as_array()
        i += 1
        cols = R.T @ random_sl2z(rng)
        if np.abs(cols).max() <= bound:
            out.append(cols.T)
    return np.array(out)


def _brute_force_argmin(B, bound=50):
    m = np.arange(-bound, bound + 1)
    M, N = (a.ravel() for a in np.meshgrid(m, m, indexing="ij"))
    keep = (M != 0) | (N != 0)
    M, N = M[keep], N[keep]
    x = B[:, 0, 0, None] * M + B[:, 1, 0, None] * N
    y = B[:, 0, 1, None] * M + B[:, 1, 1, None] * N
    k = np.argmin(x * x + y * y, axis=1)
    return M[k], N[k]


def test_c3_reduction_and_counting_exact():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    B = _bounded_skewed_bases(rng, 10_000)
    red_bad = 0
    for s in range(0, len(B), 500):
        mb, nb = _brute_force_argmin(B[s : s + 500])
        for k in range(len(mb)):
            _, U = reduce_with_transform(Basis2.from_rows(B[s + k]))
            if (U[0][0], U[1][0]) not in ((mb[k], nb[k]), (-mb[k], -nb[k])):
                red_bad += 1
    cnt_bad = 0
    for i in range(1000):
        L = sample_haar_lattice(RngStream(SEED, i))
        X = sample_translation(RngStream(SEED, i), L)
        a = float(rng.uniform(0.05, 1.0))
        t = float(rng.uniform(1.0, 100.0))
        sq = Square(a, t, X)
        cnt_bad += count_points(L, sq) != brute_force_count(L, sq)
    ok = red_bad == 0 and cnt_bad == 0
    assert record(
        3, "reduction and counting exactness", ok, f"reduction {red_bad}/10000 mismatches, counting {cnt_bad}/1000", t0
    )


# ---------------------------------------------------------------- 4


def test_c4_flow_identities():
    t0 = time.perf_counter()
    n_orbits, K = 1000, 20
    B = sample_haar_batch(SEED, range(n_orbits))
    norms = orbit_norms_batch(B, -K, K)
    ratio = norms[:, 1:] / norms[:, :-1]
    bound_bad = int(np.sum((ratio < math.exp(-2) * (1 - 1e-12)) | (ratio > math.exp(2) * (1 + 1e-12))))

    e, _ = canonical_batch(reduce_batch(B))
    short_bad = 0
    num_bad = 0
    for j in range(n_orbits):
        ev = Vec2(*e[j])
        for k in range(-K, K + 1):
            f = apply_flow(ev, k)
            if abs(num(f) - num(ev)) > 1e-12 * abs(num(ev)):
                num_bad += 1
            if math.exp(abs(k)) * ev.norm() < 1:
                short_bad += abs(norms[j, k + K] - f.norm_sq()) > 1e-9 * f.norm_sq()

    rng = np.random.default_rng(SEED)
    uni_bad = 0
    for _ in range(1000):
        v = (math.exp(rng.uniform(-5, 5)), float(rng.choice([-1, 1])) * math.exp(rng.uniform(-5, 5)))
        d = np.sign(np.diff([apply_flow(v, k).norm_sq() for k in range(-20, 21)]))
        turns = np.count_nonzero(np.diff(d))
        uni_bad += bool(np.any(d == 0) or turns > 1 or (turns == 1 and not d[0] < 0 < d[-1]))

    trip_bad = 0
    members = 0
    for j in range(n_orbits):
        L = Basis2.from_rows(B[j])
        for h in index_set_I_tilde(L, E10, 0.1):
            members += 1
            trip_bad += fundamental_index_h(l_of(L, h)) != h
    total = bound_bad + short_bad + num_bad + uni_bad + trip_bad
    detail = (
        f"step bounds {bound_bad}, short-vector equality {short_bad}, unimodality {uni_bad}, "
        f"Num invariance {num_bad}, roundtrip {trip_bad}/{members} index-set members"
    )
    assert record(4, "flow identities", total == 0, detail, t0)


# ---------------------------------------------------------------- 5


def test_c5_fundamental_domain():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n = 100_000
    x1 = np.exp(rng.uniform(-12, 12, n))
    x2 = rng.choice([-1.0, 1.0], n) * np.exp(rng.uniform(-12, 12, n))
    bad = 0
    for a, b in zip(x1, x2):
        h, m, y = fundamental_domain_coordinates((a, b))
        z1, z2 = math.exp(h) * a, math.exp(-h) * b
        ok = (
            -0.5 <= y < 0.5
            and abs(m - math.sqrt(a * abs(b))) <= 1e-9 * m
            and abs(z1 - m * math.exp(y)) <= 1e-9 * z1
            and abs(z2 - math.copysign(m * math.exp(-y), b)) <= 1e-9 * abs(z2)
        )
        bad += not ok
    assert record(5, "fundamental-domain index", bad == 0, f"{bad}/{n} violations", t0)


# ---------------------------------------------------------------- 6, 7


def test_c6_poisson_limit():
    t0 = time.perf_counter()
    cfg = cli.build_config("poisson", {}, {"seed": SEED, "samples": 5000, "T": 2000, "epsilon": 0.1})
    rep = cli.run_poisson_process(cfg)
    v = rep.verdicts[0]
    detail = (
        f"mean={v['mean_count']:.3f} vs D/eps={POISSON_INTENSITY_D / 0.1:.3f} "
        f"(drift {100 * (v['mean_count'] / v['expected_mean'] - 1):+.1f}%), chi2 p={v['count_chi2_p']:.3g}, "
        f"position KS p={v['position_ks_p']:.3g}, half-window r={v['disjoint_window_corr']:+.4f}"
    )
    assert record(6, "Poisson limit", bool(v["pass"]), detail, t0)


def test_c7_pair_correlation():
    t0 = time.perf_counter()
    B = sample_haar_batch(SEED, range(200_000))
    T = 2000
    tab = pair_correlation_check(B, T, 0.2 * T, (1, 2, 3, 5, 8, 12))
    far = [i for i, g in enumerate(tab.gaps) if g in (5, 8, 12)]
    indep = all(abs(tab.z_independence[i]) <= 3 for i in far)
    zs = ", ".join(f"gap {tab.gaps[i]} z={tab.z_independence[i]:+.2f}" for i in far)
    ok = indep and tab.monotone
    assert record(7, "pair correlation", ok, f"{zs}; fit d1={tab.d1:.3f} d2={tab.d2:.3f} monotone={tab.monotone}", t0)


# ---------------------------------------------------------------- 8, 9


def test_c8_ergodic_cauchy():
    t0 = time.perf_counter()
    cfg = cli.build_config("ergodic-cauchy", {}, {"seed": SEED, "samples": 10_000, "T": 2000})
    S = np.array([r[1] for r in cli.run_ergodic_cauchy(cfg).records])
    v = cauchy_verdict(S)
    assert record(8, "ergodic sum Cauchy law", v.passed(), battery_detail(v), t0)


def test_c9_counting_error_cauchy():
    t0 = time.perf_counter()
    cfg = cli.build_config("counting-error", {}, {"seed": SEED, "samples": 4000, "t_values": str(E10), "a": 0.5, "beta": 1})
    rows = np.array(cli.run_counting_error(cfg).records, dtype=float)
    parts = {"R/log t": rows[:, 4], "Sigma(t-)": rows[:, 5], "Sigma(t)": rows[:, 6], "Sigma(t+)": rows[:, 7]}
    verdicts = {k: cauchy_verdict(x) for k, x in parts.items()}
    d = float(ks_2samp(rows[:, 5], rows[:, 7]).statistic)
    ok = all(v.passed() for v in verdicts.values()) and d < 0.05
    detail = "; ".join(f"{k} {'ok' if v.passed() else 'FAIL'} ({battery_detail(v)})" for k, v in verdicts.items())
    assert record(9, "counting error Cauchy law", ok, f"{detail}; KS(t+, t-)={d:.4f}", t0)


# ---------------------------------------------------------------- 10


def test_c10_negative_controls():
    t0 = time.perf_counter()
    g = np.random.default_rng(SEED).standard_normal(10_000)
    v = cauchy_verdict(g)
    checks = v.checks()
    spaced = poisson_battery([np.arange(1, 6) * 2.0 - 1.0] * 5000, 10.0, 0.5)
    ok = not checks["ecf"] and not checks["hill"] and not spaced.checks()["chi2"]
    detail = (
        f"Gaussian ecf R2={v.ecf_r2:.4f} (rejected={not checks['ecf']}), hill={v.hill_alpha:.2f} "
        f"(rejected={not checks['hill']}); equally spaced chi2 p={spaced.count_chi2_p:.2g}"
    )
    assert record(10, "negative controls", ok, detail, t0)
