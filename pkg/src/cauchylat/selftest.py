"""Oracle-equivalence suites run by ``cauchylat selftest``."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from .counting import Square, brute_force_count, count_points
from .geodesic_process import (
    fundamental_domain_coordinates,
    fundamental_index_h,
    index_set_I_tilde,
    l_of,
    mod1_product,
    orbit_norms,
)
from .lattice_core import Basis2, canonical_shortest, reduce_with_transform
from .sampling import RngStream, sample_haar_lattice, sample_translation


class SuiteResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def random_sl2z(rng: np.random.Generator, bound: int = 20) -> np.ndarray:
    """Random integer matrix of determinant 1 with entries in ``[-bound, bound]``."""
    while True:
        a, c = (int(v) for v in rng.integers(-bound, bound + 1, size=2))
        if math.gcd(a, c) != 1:
            continue
        # extended Euclid: a*d - c*b = 1
        g, x, y = _egcd(a, c)
        d, b = x * g, -y * g
        ks = [k for k in range(-2 * bound, 2 * bound + 1) if abs(b + k * a) <= bound and abs(d + k * c) <= bound]
        if not ks:
            continue
        k = ks[int(rng.integers(len(ks)))]
        return np.array([[a, b + k * a], [c, d + k * c]], dtype=np.int64)


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (1 if a >= 0 else -1), (1 if a >= 0 else -1), 0
    old_r, r, old_s, s, old_t, t = a, b, 1, 0, 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    sign = 1 if old_r > 0 else -1
    return sign, old_s, old_t


def brute_force_minimum(L: Basis2, bound: int = 50) -> tuple[float, int, int]:
    """Smallest ``|m b1 + n b2|^2`` over ``|m|, |n| <= bound`` and a minimiser."""
    r = np.arange(-bound, bound + 1, dtype=float)
    m, n = np.meshgrid(r, r, indexing="ij")
    x = m * L.b1.x1 + n * L.b2.x1
    y = m * L.b1.x2 + n * L.b2.x2
    q = x * x + y * y
    q[bound, bound] = np.inf
    k = int(np.argmin(q))
    return float(q.flat[k]), int(m.flat[k]), int(n.flat[k])


def skewed_basis(seed: int, index: int, rng: np.random.Generator) -> tuple[Basis2, Basis2]:
    """A Haar lattice and the same lattice presented through a random SL2(Z) change of basis."""
    R = sample_haar_lattice(RngStream(seed, index))
    U = random_sl2z(rng)
    cols = R.as_array().T @ U
    return R, Basis2.from_columns(cols)


def suite_reduction(n: int = 500, seed: int = 101) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(n):
        _, B = skewed_basis(seed, i, rng)
        red, U = reduce_with_transform(B)
        q, m, k = brute_force_minimum(B)
        same = (U[0][0], U[1][0]) in ((m, k), (-m, -k))
        if not same or abs(red.b1.norm_sq() - q) > 1e-9 * q:
            bad += 1
    return SuiteResult("reduction vs brute force", bad == 0, f"{bad}/{n} mismatches")


def suite_counting(n: int = 200, seed: int = 102) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(n):
        L = sample_haar_lattice(RngStream(seed, i))
        X = sample_translation(RngStream(seed, i), L)
        a = float(rng.uniform(0.05, 2.0))
        t = float(rng.uniform(1.0, min(100.0, 100.0 / a)))
        sq = Square(a, t, X)
        if count_points(L, sq) != brute_force_count(L, sq):
            bad += 1
    return SuiteResult("row counting vs brute force", bad == 0, f"{bad}/{n} mismatches")


def suite_fundamental_domain(n: int = 10_000, seed: int = 103) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        x1 = float(np.exp(rng.uniform(-20, 20)))
        x2 = float(np.exp(rng.uniform(-20, 20))) * (1 if rng.random() < 0.5 else -1)
        _, m, y = fundamental_domain_coordinates((x1, x2))
        if not (-0.5 <= y < 0.5) or abs(m - math.sqrt(x1 * abs(x2))) > 1e-9 * m:
            bad += 1
    return SuiteResult("fundamental-domain index", bad == 0, f"{bad}/{n} violations")


def suite_flow(n: int = 100, seed: int = 104) -> SuiteResult:
    bad = 0
    for i in range(n):
        L = sample_haar_lattice(RngStream(seed, i))
        orb = orbit_norms(L, -10, 10)
        ratios = orb.norms_sq[1:] / orb.norms_sq[:-1]
        if np.any(ratios < math.exp(-2) * (1 - 1e-12)) or np.any(ratios > math.exp(2) * (1 + 1e-12)):
            bad += 1
        t = math.exp(8.0)
        for h in index_set_I_tilde(L, t, 0.1):
            l = l_of(L, h)
            if fundamental_index_h(l) != h:
                bad += 1
        e = canonical_shortest(L)
        if e.norm() < 1:
            for k in range(-3, 4):
                if math.exp(abs(k)) * e.norm() < 1:
                    lhs = orb.norm_sq(k)
                    rhs = math.exp(2 * k) * e.x1**2 + math.exp(-2 * k) * e.x2**2
                    if abs(lhs - rhs) > 1e-9 * rhs:
                        bad += 1
    return SuiteResult("flow identities", bad == 0, f"{bad} violations over {n} orbits")


def suite_phase(n: int = 2000, seed: int = 105) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        l = float(rng.uniform(-3e4, 3e4))
        t = float(rng.uniform(3.0, 1e5))
        a = float(rng.uniform(0.1, 2.0))
        m = int(rng.integers(1, 10_001))
        base = float(mod1_product(l, t, a))
        got = (m * base) % 1.0
        exact = (Fraction(m) * Fraction(l) * Fraction(t) * Fraction(a)) % 1
        d = abs(got - float(exact))
        worst = max(worst, min(d, 1 - d))
    return SuiteResult("phase reduction", worst < 1e-6, f"max phase error {worst:.2e}")


SUITES: tuple[Callable[[], SuiteResult], ...] = (
    suite_reduction,
    suite_counting,
    suite_fundamental_domain,
    suite_flow,
    suite_phase,
)


def run_all() -> list[SuiteResult]:
    return [suite() for suite in SUITES]

