"""Quantities read off the orbit ``i -> delta_i L`` of a lattice.

Orbits are computed by unit-step transport from time 0 outwards (one sweep
forward, one backward), never by forming ``e^i`` explicitly.  Rounding errors
grow like ``e^{2|i|} 2^-53`` relative to the exact orbit of the stored basis,
so windows beyond ``|i| ~ 12`` produce a pseudo-orbit: statistically faithful
under Haar sampling but not pointwise exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, SizeError
from .lattice_core import (
    Basis2,
    Vec2,
    _canonical_from_reduced,
    as_batch,
    canonical_batch,
    exact_combination,
    reduce_batch,
    step_batch,
    transport,
)

MAX_WINDOW = 10**6
COSH1_2 = 2.0 * math.cosh(1.0)


def window_half_width(T: int, eps: float) -> int:
    """``W = ceil(log T / 2 + log(eps) / 2 - 3)`` clamped at 0."""
    return max(0, math.ceil(math.log(T) / 2.0 + math.log(eps) / 2.0 - 3.0))


# ---------------------------------------------------------------------------
# Orbits


def _norm_sq_batch(C: np.ndarray) -> np.ndarray:
    return C[:, 0, 0] * C[:, 0, 0] + C[:, 0, 1] * C[:, 0, 1]


def orbit_norms_batch(B, i_min: int, i_max: int, checkpoint_every: int = 0):
    """``|delta_i L|^2`` for ``i`` in ``[i_min, i_max]``, one row per lattice.

    With ``checkpoint_every > 0`` also returns ``{i: reduced batch}`` at the
    multiples of ``checkpoint_every`` inside the window.
    """
    if i_max < i_min:
        raise DomainError("empty window")
    if i_max - i_min > MAX_WINDOW:
        raise SizeError("orbit window too large")
    C0 = reduce_batch(as_batch(B))
    out = np.empty((C0.shape[0], i_max - i_min + 1))
    checkpoints = {}

    def record(i, C):
        if i_min <= i <= i_max:
            out[:, i - i_min] = _norm_sq_batch(C)
            if checkpoint_every and i % checkpoint_every == 0:
                checkpoints[i] = C.copy()

    record(0, C0)
    for sign, stop in ((1, i_max), (-1, i_min)):
        C = C0
        for i in range(sign, stop + sign, sign) if stop * sign > 0 else ():
            C = step_batch(C, sign)
            record(i, C)
    if checkpoint_every:
        return out, checkpoints
    return out


@dataclass(frozen=True)
class OrbitRecord:
    """``norms_sq[k] = |delta_{i_min + k} L|^2`` and sparse reduced-basis checkpoints."""

    i_min: int
    i_max: int
    norms_sq: np.ndarray
    checkpoints: tuple[tuple[int, Basis2], ...] = ()

    def norm_sq(self, i: int) -> float:
        if not self.i_min <= i <= self.i_max:
            raise DomainError(f"time {i} outside the orbit window")
        return float(self.norms_sq[i - self.i_min])

    def covers(self, lo: int, hi: int) -> bool:
        return self.i_min <= lo and hi <= self.i_max


def orbit_norms(L: Basis2, i_min: int, i_max: int, checkpoint_every: int = 1000) -> OrbitRecord:
    """Orbit record of ``L`` over the integer window ``[i_min, i_max]``."""
    norms, cps = orbit_norms_batch(as_batch(L), i_min, i_max, checkpoint_every)
    norms = norms[0]
    norms.setflags(write=False)
    cp = tuple((i, Basis2.from_rows(C[0])) for i, C in sorted(cps.items()))
    return OrbitRecord(i_min, i_max, norms, cp)


def threshold_set_A1(orbit: OrbitRecord, T: int, eps: float) -> list[int]:
    """Times ``i`` in ``[0, T-1]`` with ``T |delta_i L|^2 <= 1/eps``."""
    if not orbit.covers(0, T - 1):
        raise DomainError("orbit must cover [0, T-1]")
    n = orbit.norms_sq[-orbit.i_min : -orbit.i_min + T]
    return [int(i) for i in np.flatnonzero(T * n <= 1.0 / eps)]


def _local_minima_mask(n: np.ndarray, T: int, eps: float) -> np.ndarray:
    """Rows of ``n`` cover times ``[-1, T]``; returns the A2 mask over ``[0, T-1]``."""
    mid = n[..., 1:-1]
    return (n[..., :-2] > mid) & (mid < n[..., 2:]) & (T * mid <= 1.0 / eps)


def local_minima_A2(orbit: OrbitRecord, T: int, eps: float) -> list[int]:
    """Strict local minima of ``i -> |delta_i L|`` that belong to A1."""
    if not orbit.covers(-1, T):
        raise DomainError("orbit must cover [-1, T]")
    n = orbit.norms_sq[-1 - orbit.i_min : T + 1 - orbit.i_min]
    return [int(i) for i in np.flatnonzero(_local_minima_mask(n, T, eps))]


# ---------------------------------------------------------------------------
# Ergodic sum and the marked process


def ergodic_sum_batch(B, theta: np.ndarray) -> np.ndarray:
    """``(1/T) sum_t theta[k, t] / |delta_t L_k|^2`` for every row ``k``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    T = theta.shape[1]
    norms = orbit_norms_batch(B, 0, T - 1)
    terms = theta / norms
    return np.array([math.fsum(row) / T for row in terms])


def ergodic_sum_S(L: Basis2, theta: Sequence[float], T: int) -> float:
    """``S = (1/T) sum_{t<T} theta_t / |delta_t L|^2``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (T,):
        raise DomainError("theta must have length T")
    return float(ergodic_sum_batch(as_batch(L), theta[None])[0])


class MarkedPoint(NamedTuple):
    time: int
    xi: float
    mark: float


@dataclass(frozen=True)
class MarkedPointProcess:
    """Points ``(i, Xi_i, Gamma_i)`` for ``i`` in A2, in increasing time."""

    points: tuple[MarkedPoint, ...]

    @property
    def xis(self) -> np.ndarray:
        return np.array([p.xi for p in self.points], dtype=float)

    @property
    def marks(self) -> np.ndarray:
        return np.array([p.mark for p in self.points], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.points], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.points)


def xi_gamma_batch(B, theta: np.ndarray, T: int, eps: float) -> list[MarkedPointProcess]:
    """Marked processes for a batch; ``theta[k, j]`` is ``theta_{j - W}`` of lattice ``k``."""
    W = window_half_width(T, eps)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[1] != T + 2 * W:
        raise DomainError(f"theta must cover [-{W}, {T - 1 + W}] ({T + 2 * W} values)")
    pad = max(W, 1)
    norms = orbit_norms_batch(B, -pad, T - 1 + pad)
    core = norms[:, pad - 1 : pad + T + 1]
    mask = _local_minima_mask(core, T, eps)
    out = []
    for k in range(norms.shape[0]):
        pts = []
        for i in np.flatnonzero(mask[k]):
            ni = norms[k, i + pad]
            g = 0.0
            for j in range(-W, W + 1):
                g += theta[k, i + j + W] * ni / norms[k, i + j + pad]
            pts.append(MarkedPoint(int(i), float(T * ni), float(g)))
        out.append(MarkedPointProcess(tuple(pts)))
    return out


def xi_gamma_process(L: Basis2, theta: Sequence[float], T: int, eps: float) -> MarkedPointProcess:
    """``Xi_i = T |delta_i L|^2`` and ``Gamma_i = sum_{|k|<=W} theta_{i+k} |delta_i L|^2 / |delta_{i+k} L|^2`` over A2.

    ``theta`` lists ``theta_{-W}, ..., theta_{T-1+W}``.
    """
    return xi_gamma_batch(as_batch(L), np.asarray(theta, dtype=float)[None], T, eps)[0]


# ---------------------------------------------------------------------------
# Fundamental domain and the vectors l(L, h)


def fundamental_index_h(x) -> int:
    """The integer ``h`` with ``delta_h x = m (e^y, +-e^-y)``, ``y`` in ``[-1/2, 1/2)``.

    With ``r = log(|x2| / x1)``: ``h = ceil(r)/2`` when ``ceil(r)`` is even and
    ``(ceil(r) - 1)/2`` otherwise.
    """
    x1, x2 = float(x[0]), float(x[1])
    if not x1 > 0 or x2 == 0:
        raise DomainError("need x1 > 0 and x2 != 0")
    r = math.log(abs(x2)) - math.log(x1)
    return math.ceil(r) // 2


def fundamental_domain_coordinates(x) -> tuple[int, float, float]:
    """``(h, m, y)`` with ``delta_h x = m (e^y, sgn(x2) e^-y)``."""
    h = fundamental_index_h(x)
    x1, x2 = float(x[0]), float(x[1])
    z1, z2 = math.exp(h) * x1, math.exp(-h) * abs(x2)
    return h, math.sqrt(z1 * z2), 0.5 * (math.log(z1) - math.log(z2))


def l_of(L: Basis2, h: int) -> Vec2:
    """``l(L, h) = delta_{-h} e(delta_h L)`` as an exact integer combination of ``L``'s basis."""
    if abs(h) > MAX_WINDOW:
        raise SizeError("|h| too large")
    s = transport(L, h)
    _, c1, c2 = _canonical_from_reduced(s.base.b1, s.base.b2)
    m, n = s.original_coefficients(c1, c2)
    return exact_combination(L, m, n)


# ---------------------------------------------------------------------------
# Error-free transformations for phases


_SPLIT = 134217729.0  # 2^27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """``a*b = p + e`` exactly (Dekker)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def frac_dd(hi, lo):
    """Fractional part in ``[0, 1)`` of the double-double ``hi + lo``."""
    f = hi - np.floor(hi)
    s, e = two_sum(f, lo)
    v = (s - np.floor(s)) + e
    v = v - np.floor(v)
    return np.where(v >= 1.0, 0.0, v)


def mod1_product(x, y, z=None):
    """``x*y`` (or ``x*y*z``) modulo 1, with the products formed without rounding loss."""
    p, e = two_prod(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if z is not None:
        p, e2 = two_prod(p, z)
        e = e2 + e * z
    return frac_dd(p, e)


def mod1_dot(l1, l2, X1, X2):
    """``l1*X1 + l2*X2`` modulo 1."""
    p1, e1 = two_prod(np.asarray(l1, dtype=float), X1)
    p2, e2 = two_prod(np.asarray(l2, dtype=float), X2)
    f1 = p1 - np.floor(p1)
    f2 = p2 - np.floor(p2)
    s, e = two_sum(f1, f2)
    return frac_dd(s, e + (e1 + e2))


def _combination(B: np.ndarray, m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """``m*b1 + n*b2`` with compensated products (batch of vectors)."""
    out = np.empty(m.shape + (2,))
    mf, nf = m.astype(float), n.astype(float)
    for j in range(2):
        p1, e1 = two_prod(mf, B[..., 0, j])
        p2, e2 = two_prod(nf, B[..., 1, j])
        s, e = two_sum(p1, p2)
        out[..., j] = s + (e + (e1 + e2))
    return out


# ---------------------------------------------------------------------------
# Index set and the Fourier sum


class OrbitScan(NamedTuple):
    """Orbit data for ``h`` in ``[-H, H]`` (column ``h + H``)."""

    H: int
    norms_sq: np.ndarray  # (N, 2H+1)
    e: np.ndarray  # (N, 2H+1, 2) canonical shortest vector of delta_h L
    coeffs: np.ndarray  # (N, 2H+1, 2) its integer coordinates in the original basis


def orbit_scan_batch(B, H: int) -> OrbitScan:
    """Canonical shortest vectors along ``[-H, H]`` with exact integer drift (``H <= 30``)."""
    if H > 30:
        raise SizeError("drift tracking in 64-bit integers needs H <= 30")
    B = as_batch(B)
    N = B.shape[0]
    U0 = np.broadcast_to(np.eye(2, dtype=np.int64), (N, 2, 2)).copy()
    C0, U0 = reduce_batch(B, U0)
    norms = np.empty((N, 2 * H + 1))
    evec = np.empty((N, 2 * H + 1, 2))
    coeffs = np.empty((N, 2 * H + 1, 2), dtype=np.int64)

    def record(h, C, U):
        v, c = canonical_batch(C)
        norms[:, h + H] = _norm_sq_batch(C)
        evec[:, h + H] = v
        coeffs[:, h + H] = np.einsum("kij,kj->ki", U, c)

    record(0, C0, U0)
    for sign in (1, -1):
        C, U = C0, U0
        for i in range(1, H + 1):
            C, U = step_batch(C, sign, U)
            record(sign * i, C, U)
    return OrbitScan(H, norms, evec, coeffs)


def itilde_mask(scan: OrbitScan, t: float, eps: float) -> np.ndarray:
    num_e = np.abs(scan.e[..., 0] * scan.e[..., 1])
    return (scan.norms_sq < COSH1_2 * num_e) & (num_e <= 1.0 / (eps * math.log(t)))


def _check_t(t: float) -> None:
    if not t > math.e:
        raise DomainError("t must exceed e")


def index_set_I_tilde(L: Basis2, t: float, eps: float) -> list[int]:
    """``h`` in ``[-ceil(log t), ceil(log t)]`` with ``|delta_h L|^2 < 2 cosh(1) |Num e|`` and ``|Num e| <= 1/(eps log t)``."""
    _check_t(t)
    H = math.ceil(math.log(t))
    scan = orbit_scan_batch(as_batch(L), H)
    return [int(j) - H for j in np.flatnonzero(itilde_mask(scan, t, eps)[0])]


class SigmaTerm(NamedTuple):
    h: int
    num_l: float
    phase1: float
    phase2: float
    phaseX: float


def tau(t: float) -> float:
    """``log(t)^(1/4) / t``."""
    return math.log(t) ** 0.25 / t


def shifted_t(t: float, beta: float, sign: int) -> float:
    """``t + sign * beta * tau(t)``."""
    return t + sign * beta * tau(t)


def _fourier_kernel(p1: np.ndarray, p2: np.ndarray, pX: np.ndarray, m_max: int, block: int = 2_000_000) -> np.ndarray:
    """``sum_{m<=m_max} sin(2 pi m p1) sin(2 pi m p2) cos(2 pi m pX) / m^2`` per entry."""
    out = np.empty(p1.shape)
    m = np.arange(1, m_max + 1, dtype=float)
    w = 1.0 / (m * m)
    step = max(1, block // m_max)
    two_pi = 2.0 * math.pi
    for s in range(0, p1.size, step):
        sl = slice(s, s + step)
        # m * p is formed directly: its rounding error is below m_max * 2^-53
        a = np.outer(p1[sl], m)
        b = np.outer(p2[sl], m)
        c = np.outer(pX[sl], m)
        a -= np.floor(a)
        b -= np.floor(b)
        c -= np.floor(c)
        # row-wise reduction instead of BLAS keeps each entry independent of the batch size
        out[sl] = (np.sin(two_pi * a) * np.sin(two_pi * b) * np.cos(two_pi * c) * w).sum(axis=1)
    return out


def sigma_batch(
    B,
    X: np.ndarray,
    t: float,
    a: float,
    eps: float,
    beta: float = 1.0,
    m_max: int = 10_000,
    signs: Sequence[int] = (1,),
) -> np.ndarray:
    """``Sigma`` for every lattice in ``B`` (rows) and every ``t`` shift sign (columns)."""
    _check_t(t)
    if m_max < 1:
        raise DomainError("m_max must be at least 1")
    B = as_batch(B)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    H = math.ceil(math.log(t))
    scan = orbit_scan_batch(B, H)
    k, j = np.nonzero(itilde_mask(scan, t, eps))
    out = np.zeros((B.shape[0], len(signs)))
    if k.size == 0:
        return out
    l = _combination(B[k], scan.coeffs[k, j, 0], scan.coeffs[k, j, 1])
    num_l = l[:, 0] * l[:, 1]
    pX = mod1_dot(l[:, 0], l[:, 1], X[k, 0], X[k, 1])
    pref = 2.0 / (math.pi**2 * math.log(t))
    for col, sign in enumerate(signs):
        tp = shifted_t(t, beta, sign)
        p1 = mod1_product(l[:, 0], tp, a)
        p2 = mod1_product(l[:, 1], tp, a)
        g = _fourier_kernel(p1, p2, pX, m_max) / num_l
        out[:, col] = pref * np.bincount(k, weights=g, minlength=B.shape[0])
    return out


def sigma_terms(L: Basis2, X, t: float, a: float, eps: float, beta: float = 1.0, sign: int = 1) -> list[SigmaTerm]:
    """The per-``h`` data entering ``Sigma``."""
    _check_t(t)
    B = as_batch(L)
    H = math.ceil(math.log(t))
    scan = orbit_scan_batch(B, H)
    js = np.flatnonzero(itilde_mask(scan, t, eps)[0])
    if js.size == 0:
        return []
    k = np.zeros(js.size, dtype=np.int64)
    l = _combination(B[k], scan.coeffs[0, js, 0], scan.coeffs[0, js, 1])
    tp = shifted_t(t, beta, sign)
    p1 = mod1_product(l[:, 0], tp, a)
    p2 = mod1_product(l[:, 1], tp, a)
    pX = mod1_dot(l[:, 0], l[:, 1], float(X[0]), float(X[1]))
    return [
        SigmaTerm(int(j) - H, float(l[i, 0] * l[i, 1]), float(p1[i]), float(p2[i]), float(pX[i]))
        for i, j in enumerate(js)
    ]


def sigma_sum(
    L: Basis2,
    X,
    t: float,
    a: float,
    eps: float,
    beta: float = 1.0,
    m_max: int = 10_000,
    sign: int = 1,
) -> float:
    """Truncated Fourier sum over ``h`` in the index set, evaluated at ``t + sign * beta * tau``.

    ``(2 / (pi^2 log t)) sum_h (1/Num l) sum_{m<=m_max} sin(2 pi m l1 t' a) sin(2 pi m l2 t' a) cos(2 pi m <l, X>) / m^2``
    """
    X = np.asarray([float(X[0]), float(X[1])])
    return float(sigma_batch(as_batch(L), X[None], t, a, eps, beta, m_max, (sign,))[0, 0])
