import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauchylat.errors import DomainError, SizeError
from cauchylat.geodesic_process import (
    MarkedPointProcess,
    OrbitRecord,
    ergodic_sum_S,
    ergodic_sum_batch,
    fundamental_domain_coordinates,
    fundamental_index_h,
    index_set_I_tilde,
    l_of,
    local_minima_A2,
    orbit_norms,
    orbit_norms_batch,
    threshold_set_A1,
    window_half_width,
    xi_gamma_batch,
    xi_gamma_process,
)
from cauchylat.lattice_core import IDENTITY, canonical_shortest, num, transport
from cauchylat.sampling import ThetaDist, sample_haar_batch, theta_batch

from oracles import direct_ergodic_sum, mp_flow_minimum, mp_orbit_norms, scan_local_minima

E = math.e


# ---------------------------------------------------------------- orbits


def test_identity_orbit():
    o = orbit_norms(IDENTITY, 0, 3)
    assert np.allclose(o.norms_sq, [1, E**-2, E**-4, E**-6], rtol=1e-14)
    assert o.norm_sq(2) == pytest.approx(E**-4)
    with pytest.raises(DomainError):
        o.norm_sq(4)


def test_orbit_ratio_bounds():
    n = orbit_norms_batch(sample_haar_batch(51, range(1000)), -50, 50)
    r = n[:, 1:] / n[:, :-1]
    assert np.all(r >= E**-2 * (1 - 1e-12)) and np.all(r <= E**2 * (1 + 1e-12))


def test_orbit_group_property(haar):
    for i in range(20):
        L = haar(52, i)
        fwd = orbit_norms(L, 0, 5).norms_sq
        shifted = transport(L, 5)
        back = orbit_norms(shifted.base, -5, 0).norms_sq
        assert np.allclose(fwd, back, rtol=1e-9)


def test_orbit_matches_high_precision(haar):
    for i in range(10):
        L = haar(53, i)
        got = orbit_norms(L, -10, 10).norms_sq
        assert np.allclose(got, mp_orbit_norms(L, -10, 10), rtol=1e-6)


def test_orbit_window_checks():
    with pytest.raises(DomainError):
        orbit_norms_batch(IDENTITY, 3, 2)
    with pytest.raises(SizeError):
        orbit_norms_batch(IDENTITY, 0, 10**7)


def test_orbit_checkpoints(haar):
    o = orbit_norms(haar(54, 0), -5, 2500, checkpoint_every=1000)
    assert [i for i, _ in o.checkpoints] == [0, 1000, 2000]
    assert o.checkpoints[1][1].b1.norm_sq() == o.norm_sq(1000)
    assert isinstance(o, OrbitRecord)


# ---------------------------------------------------------------- index sets


def _record(norms, i_min):
    norms = np.asarray(norms, dtype=float)
    return OrbitRecord(i_min, i_min + len(norms) - 1, norms)


def test_A1_examples():
    assert threshold_set_A1(_record(np.full(12, 1e9), 0), 10, 0.1) == []
    o = orbit_norms(IDENTITY, 0, 9)
    assert threshold_set_A1(o, 10, 0.01) == list(range(10))


def test_A1_monotone_in_eps():
    n = orbit_norms_batch(sample_haar_batch(55, range(100)), 0, 199)
    for row in n:
        o = _record(row, 0)
        small = set(threshold_set_A1(o, 200, 0.2))
        assert small <= set(threshold_set_A1(o, 200, 0.05))


def test_A2_monotone_sequence_empty():
    assert local_minima_A2(_record(np.exp(-np.arange(-1, 12)), -1), 11, 0.1) == []


def test_A2_matches_scan():
    T, eps = 1000, 0.1
    n = orbit_norms_batch(sample_haar_batch(56, range(1000)), -1, T)
    total = 0
    for row in n:
        got = local_minima_A2(_record(row, -1), T, eps)
        assert got == scan_local_minima(row, T, eps)
        total += len(got)
        # Gap rule log T + 2 C_eps with C_eps = log(eps)/2 - 3
        gap = math.log(T) + 2 * (math.log(eps) / 2 - 3)
        assert all(b - a >= gap for a, b in zip(got, got[1:]))
    assert total > 1000


def test_A2_requires_margin():
    with pytest.raises(DomainError):
        local_minima_A2(orbit_norms(IDENTITY, 0, 10), 10, 0.1)


# ---------------------------------------------------------------- ergodic sum


def test_ergodic_T1(haar):
    L = haar(57, 0)
    assert ergodic_sum_S(L, [0.7], 1) == pytest.approx(0.7 / canonical_shortest(L).norm_sq(), rel=1e-15)


def test_ergodic_odd(haar):
    L = haar(57, 1)
    th = np.random.default_rng(0).choice([-1.0, 1.0], size=300)
    assert ergodic_sum_S(L, -th, 300) == -ergodic_sum_S(L, th, 300)


def test_ergodic_matches_naive_sum():
    rng = np.random.default_rng(58)
    B = sample_haar_batch(58, range(100))
    T = 500
    th = rng.uniform(-1, 1, size=(100, T))
    got = ergodic_sum_batch(B, th)
    n = orbit_norms_batch(B, 0, T - 1)
    naive = np.array([sum(th[k, i] / n[k, i] for i in range(T)) / T for k in range(100)])
    assert np.allclose(got, naive, rtol=1e-12, atol=0)


def test_ergodic_matches_high_precision(haar):
    rng = np.random.default_rng(59)
    for i in range(10):
        L = haar(59, i)
        th = rng.choice([-1.0, 1.0], size=8)
        assert ergodic_sum_S(L, th, 8) == pytest.approx(direct_ergodic_sum(L, th, 8), rel=1e-9)


def test_ergodic_length_check():
    with pytest.raises(DomainError):
        ergodic_sum_S(IDENTITY, [1.0, 1.0], 3)


# ---------------------------------------------------------------- marked process


def test_window_half_width():
    assert window_half_width(2000, 0.1) == 0
    assert window_half_width(10**5, 0.1) == math.ceil(math.log(1e5) / 2 + math.log(0.1) / 2 - 3)
    assert window_half_width(10, 0.5) == 0


def test_xi_window_and_W0_marks():
    T, eps = 2000, 0.1
    B = sample_haar_batch(60, range(300))
    th = theta_batch(60, range(300), ThetaDist(), T)
    procs = xi_gamma_batch(B, th, T, eps)
    n = orbit_norms_batch(B, -1, T)
    for k, p in enumerate(procs):
        assert isinstance(p, MarkedPointProcess)
        assert np.all((p.xis > 0) & (p.xis <= 1 / eps))
        assert np.all(np.diff(p.times) > 0)
        assert list(p.times) == scan_local_minima(n[k], T, eps)
        # W = 0: each mark is the theta at that time
        assert np.array_equal(p.marks, th[k, p.times])
        # sum of Gamma/Xi is the ergodic sum restricted to A2
        restricted = sum(th[k, i] / n[k, i + 1] for i in p.times) / T
        assert sum(p.marks / p.xis) == pytest.approx(restricted, rel=1e-12, abs=1e-15)


def test_marks_bounded():
    """Window weights decay like 1/cosh(2|k|): |Gamma| <= K sum_k 1/cosh(2|k|) with K = e cosh(1)."""
    T, eps = 100_000, 0.1
    W = window_half_width(T, eps)
    assert W >= 1
    B = sample_haar_batch(61, range(40))
    th = theta_batch(61, range(40), ThetaDist(), T + 2 * W)
    K = E * math.cosh(1)
    bound = K * sum(1 / math.cosh(2 * abs(k)) for k in range(-W, W + 1))
    marks = np.concatenate([p.marks for p in xi_gamma_batch(B, th, T, eps)])
    assert marks.size > 100
    assert np.all(np.abs(marks) <= bound)


def test_xi_gamma_scalar_and_theta_length(haar):
    L = haar(62, 0)
    T, eps = 600, 0.1
    th = np.ones(T)
    p = xi_gamma_process(L, th, T, eps)
    assert np.all(p.marks == 1.0)
    with pytest.raises(DomainError):
        xi_gamma_process(L, th[:-1], T, eps)


def test_xi_gamma_approximates_S():
    """Sum of Gamma/Xi over A2 has the same law as S; the discarded terms are small."""
    from scipy.stats import ks_2samp

    T, eps = 2000, 0.1
    B = sample_haar_batch(63, range(2000))
    th = theta_batch(63, range(2000), ThetaDist(), T)
    S = ergodic_sum_batch(B, th)
    G = np.array([np.sum(p.marks / p.xis) for p in xi_gamma_batch(B, th, T, eps)])
    assert ks_2samp(S, G).pvalue > 0.01
    assert np.mean(np.sign(S) == np.sign(G)) > 0.8


# ---------------------------------------------------------------- fundamental domain


def test_h_examples():
    assert fundamental_index_h((1.0, 1.0)) == 0
    assert fundamental_domain_coordinates((1.0, 1.0)) == (0, 1.0, 0.0)
    h, m, y = fundamental_domain_coordinates((E**-3, E**3))
    assert h == 3 and m == pytest.approx(1.0) and y == pytest.approx(0.0, abs=1e-12)
    h, m, y = fundamental_domain_coordinates((1.0, E**2.5))
    assert h == 1 and y == pytest.approx(-0.25)
    assert -0.5 <= y < 0.5


def test_h_domain():
    for bad in ((0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)):
        with pytest.raises(DomainError):
            fundamental_index_h(bad)


@settings(max_examples=500)
@given(st.floats(-20, 20), st.floats(-20, 20), st.booleans())
def test_h_lands_in_domain(u, v, neg):
    x1, x2 = math.exp(u), math.exp(v) * (-1 if neg else 1)
    h, m, y = fundamental_domain_coordinates((x1, x2))
    assert -0.5 <= y < 0.5
    assert m == pytest.approx(math.sqrt(x1 * abs(x2)), rel=1e-9)


def test_h_tie_goes_to_even_branch():
    # log-ratio exactly 1: the two candidate shifts give y = +-1/2
    h, _, y = fundamental_domain_coordinates((1.0, E))
    assert h == 0 and y == pytest.approx(-0.5)


# ---------------------------------------------------------------- l(L, h)


def test_l_of_at_zero(haar):
    for i in range(20):
        L = haar(64, i)
        assert l_of(L, 0) == canonical_shortest(L)


def test_l_of_num_matches_flowed_vector(haar):
    for i in range(50):
        L = haar(65, i)
        for h in (-6, -1, 2, 7):
            e = canonical_shortest(transport(L, h).base)
            assert num(l_of(L, h)) == pytest.approx(num(e), rel=1e-9)


def test_l_of_matches_high_precision(haar):
    for i in range(10):
        L = haar(66, i)
        for h in (-8, 3, 8):
            _, v = mp_flow_minimum(L, h)
            l = l_of(L, h)
            ref = (float(v[0] * math.e ** (-h)), float(v[1] * math.e**h))
            s = 1 if ref[0] * l.x1 + ref[1] * l.x2 > 0 else -1
            assert l.x1 == pytest.approx(s * ref[0], rel=1e-9, abs=1e-12)
            assert l.x2 == pytest.approx(s * ref[1], rel=1e-9, abs=1e-12)


def test_l_of_guard():
    with pytest.raises(SizeError):
        l_of(IDENTITY, 10**7)


def test_itilde_roundtrip(haar):
    t, eps = math.exp(10), 0.1
    seen = 0
    for i in range(1000):
        L = haar(67, i)
        for h in index_set_I_tilde(L, t, eps):
            assert fundamental_index_h(l_of(L, h)) == h
            seen += 1
    assert seen > 500


def test_itilde_members_are_local_minima(haar):
    """With eps log t > 2 e cosh(1) every member is a strict local minimum of the orbit norm.

    Then |e|^2 < 1/e at h, while any independent vector has squared norm at
    least 1/|e|^2 and shrinks by at most e^2 per unit step.
    """
    t, eps = math.exp(10), 0.9
    assert eps * math.log(t) > 2 * math.e * math.cosh(1)
    seen = 0
    for i in range(2000):
        L = haar(70, i)
        hs = index_set_I_tilde(L, t, eps)
        if not hs:
            continue
        o = orbit_norms(L, -12, 12)
        for h in hs:
            assert o.norm_sq(h - 1) > o.norm_sq(h) < o.norm_sq(h + 1)
            seen += 1
    assert seen > 100


def test_itilde_matches_high_precision_scan(haar):
    t, eps = math.exp(6), 0.1
    H = 6
    for i in range(40):
        L = haar(68, i)
        expect = []
        for h in range(-H, H + 1):
            q, v = mp_flow_minimum(L, h)
            ne = abs(v[0] * v[1])
            if q < 2 * math.cosh(1) * ne and ne <= 1 / (eps * math.log(t)):
                expect.append(h)
        assert index_set_I_tilde(L, t, eps) == expect


def test_itilde_empty_cases(haar):
    assert index_set_I_tilde(IDENTITY, 100.0, 0.1) == []
    # pick eps so that 1/(eps log t) lies below every |Num e| along the scanned window
    L = haar(69, 0)
    t = math.exp(5)
    smallest = min(abs(float(v[0] * v[1])) for v in (mp_flow_minimum(L, h)[1] for h in range(-5, 6)))
    eps = 2.0 / (smallest * math.log(t))
    assert index_set_I_tilde(L, t, eps) == []
    with pytest.raises(DomainError):
        index_set_I_tilde(IDENTITY, 2.0, 0.1)
