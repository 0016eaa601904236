"""Geometry of unimodular lattices in the plane.

A lattice is stored through a basis ``Basis2(b1, b2)``; the lattice is
``{m*b1 + n*b2 : m, n integers}``.  Everything here exists in two flavours:

* scalar functions on ``Basis2`` / ``Vec2`` values (pure Python floats and
  unbounded integers), and
* batch kernels on arrays of shape ``(N, 2, 2)`` where ``B[k, 0]`` is the
  first basis vector of lattice ``k`` and ``B[k, 1]`` the second.

Both flavours perform the same floating-point operations in the same order, so
they agree bit for bit.  The geodesic flow ``delta_k = diag(e^k, e^-k)`` is
always applied one unit step at a time followed by a Gauss re-reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InvalidBasisError

E = math.exp(1.0)
E_INV = math.exp(-1.0)
UNIMODULAR_TOL = 1e-6
MAX_REDUCTION_ITERATIONS = 10_000

Drift = tuple[tuple[int, int], tuple[int, int]]
IDENTITY_DRIFT: Drift = ((1, 0), (0, 1))


class Vec2(NamedTuple):
    """A vector of the plane."""

    x1: float
    x2: float

    def norm_sq(self) -> float:
        return self.x1 * self.x1 + self.x2 * self.x2

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())


class Basis2(NamedTuple):
    """An ordered basis ``(b1, b2)`` of a planar lattice."""

    b1: Vec2
    b2: Vec2

    @classmethod
    def from_rows(cls, rows) -> "Basis2":
        """Build from a 2x2 array-like whose rows are the basis vectors."""
        (a, b), (c, d) = rows
        return cls(Vec2(float(a), float(b)), Vec2(float(c), float(d)))

    @classmethod
    def from_columns(cls, matrix) -> "Basis2":
        """Build from a 2x2 matrix whose columns are the basis vectors."""
        m = np.asarray(matrix, dtype=float)
        return cls.from_rows(m.T)

    def as_array(self) -> np.ndarray:
        """Rows are the basis vectors."""
        return np.array([self.b1, self.b2], dtype=float)

    def det(self) -> float:
        return self.b1.x1 * self.b2.x2 - self.b1.x2 * self.b2.x1


IDENTITY = Basis2(Vec2(1.0, 0.0), Vec2(0.0, 1.0))


def diagonal_lattice(a: float) -> Basis2:
    """Basis of ``diag(a, 1/a) Z^2``."""
    return Basis2(Vec2(a, 0.0), Vec2(0.0, 1.0 / a))


def rotated_lattice(angle: float) -> Basis2:
    """Basis of ``Rot(angle) Z^2``."""
    c, s = math.cos(angle), math.sin(angle)
    return Basis2(Vec2(c, s), Vec2(-s, c))


def num(v) -> float:
    """Product of the coordinates of ``v``."""
    return v[0] * v[1]


def check_unimodular(L: Basis2, tol: float = UNIMODULAR_TOL) -> None:
    d = L.det()
    if not math.isfinite(d) or abs(abs(d) - 1.0) > tol:
        raise InvalidBasisError(f"basis is not unimodular: det = {d!r}")


# ---------------------------------------------------------------------------
# Scalar reduction


def _reduce_with_transform(b1: Vec2, b2: Vec2) -> tuple[Vec2, Vec2, Drift]:
    """Lagrange-Gauss reduction returning ``(r1, r2, U)`` with ``[r1 r2] = [b1 b2] U``."""
    x1, y1 = b1
    x2, y2 = b2
    u11, u12, u21, u22 = 1, 0, 0, 1
    n1 = x1 * x1 + y1 * y1
    n2 = x2 * x2 + y2 * y2
    for _ in range(MAX_REDUCTION_ITERATIONS):
        if n2 < n1:
            x1, y1, x2, y2 = x2, y2, x1, y1
            n1, n2 = n2, n1
            u11, u12, u21, u22 = u12, u11, u22, u21
        mu = round((x1 * x2 + y1 * y2) / n1)
        if mu == 0:
            return Vec2(x1, y1), Vec2(x2, y2), ((u11, u12), (u21, u22))
        x2 = x2 - mu * x1
        y2 = y2 - mu * y1
        u12 -= mu * u11
        u22 -= mu * u21
        n2 = x2 * x2 + y2 * y2
    raise InvalidBasisError("Gauss reduction did not terminate")


def gauss_reduce(basis: Basis2) -> Basis2:
    """Lagrange-Gauss reduced basis of the same lattice.

    The result satisfies ``|b1| <= |b2|`` and ``|<b1, b2>| <= |b1|^2 / 2``, so
    ``|b1|`` and ``|b2|`` are the two successive minima.

    Raises
    ------
    InvalidBasisError
        If ``|det|`` differs from 1 by more than ``1e-6``.
    """
    check_unimodular(basis)
    r1, r2, _ = _reduce_with_transform(basis.b1, basis.b2)
    return Basis2(r1, r2)


def reduce_with_transform(basis: Basis2) -> tuple[Basis2, Drift]:
    """Reduced basis together with the integer matrix ``U``, ``[r1 r2] = [b1 b2] U``."""
    check_unimodular(basis)
    r1, r2, u = _reduce_with_transform(basis.b1, basis.b2)
    return Basis2(r1, r2), u


def is_reduced(L: Basis2) -> bool:
    n1 = L.b1.norm_sq()
    return n1 <= L.b2.norm_sq() and abs(L.b1.x1 * L.b2.x1 + L.b1.x2 * L.b2.x2) <= 0.5 * n1


def shortest_norm(L: Basis2) -> float:
    """First minimum ``min |l|`` over nonzero lattice vectors."""
    return gauss_reduce(L).b1.norm()


def _normalize_sign(x: float, y: float, c1: int, c2: int):
    if x < 0 or (x == 0 and y < 0):
        return -x, -y, -c1, -c2
    return x, y, c1, c2


def _canonical_from_reduced(r1: Vec2, r2: Vec2) -> tuple[Vec2, int, int]:
    """Canonical shortest vector of a reduced basis and its coefficients in it."""
    cands = []
    for c1, c2 in ((1, 0), (0, 1), (1, -1), (1, 1)):
        x = c1 * r1.x1 + c2 * r2.x1
        y = c1 * r1.x2 + c2 * r2.x2
        cands.append((x * x + y * y, x, y, c1, c2))
    best = min(c[0] for c in cands)
    tied = [_normalize_sign(x, y, c1, c2) for n, x, y, c1, c2 in cands if n == best]
    x, y, c1, c2 = max(tied, key=lambda c: (c[0], c[1]))
    return Vec2(x, y), c1, c2


def canonical_shortest(L: Basis2) -> Vec2:
    """The shortest vector ``e(L)`` with positive first coordinate.

    Ties are broken deterministically: a vector on the vertical axis is taken
    with positive second coordinate, and when two independent vectors realise
    the minimum the lexicographically largest normalised candidate wins.
    """
    r = gauss_reduce(L)
    return _canonical_from_reduced(r.b1, r.b2)[0]


def dual(L: Basis2) -> Basis2:
    """Basis of the dual lattice (inverse transpose), ``<d_i, b_j> = delta_ij``."""
    check_unimodular(L)
    d = L.det()
    (a, b), (c, e) = L.b1, L.b2
    return Basis2(Vec2(e / d, -c / d), Vec2(-b / d, a / d))


def apply_flow(v, k: int) -> Vec2:
    """``delta_k v`` for a single vector (closed form, fine for small ``|k|``)."""
    return Vec2(math.exp(k) * v[0], math.exp(-k) * v[1])


def weak_admissibility_nu(L: Basis2, r: float) -> float:
    """``inf |Num(l)|`` over lattice vectors with ``0 < |l| < r`` (exact enumeration).

    Returns ``inf`` when the set is empty (``r`` equal to the first minimum).
    """
    red = gauss_reduce(L)
    if r < red.b1.norm():
        raise DomainError("r is below the first minimum")
    n_max = int(math.floor(r * red.b1.norm()))
    m_max = int(math.floor(r * red.b2.norm()))
    r_sq = r * r
    best = math.inf
    for n in range(-n_max, n_max + 1):
        for m in range(-m_max, m_max + 1):
            if m == 0 and n == 0:
                continue
            x = m * red.b1.x1 + n * red.b2.x1
            y = m * red.b1.x2 + n * red.b2.x2
            if x * x + y * y < r_sq:
                best = min(best, abs(x * y))
    return best


# ---------------------------------------------------------------------------
# Flow with exact drift


def _unit_step(base: Basis2, sign: int) -> tuple[Vec2, Vec2]:
    f, g = (E, E_INV) if sign > 0 else (E_INV, E)
    return Vec2(base.b1.x1 * f, base.b1.x2 * g), Vec2(base.b2.x1 * f, base.b2.x2 * g)


def _compose(u: Drift, v: Drift) -> Drift:
    (a, b), (c, d) = u
    (p, q), (r, s) = v
    return ((a * p + b * r, a * q + b * s), (c * p + d * r, c * q + d * s))


@dataclass(frozen=True)
class FlowState:
    """A lattice transported along the diagonal flow.

    ``base`` is a reduced basis of ``delta_h L`` and ``drift`` the integer
    matrix with ``base = delta_h [origin] drift`` (column convention), so the
    coordinates of any vector of ``base`` in the original basis are exact.
    """

    base: Basis2
    h: int
    drift: Drift
    origin: Basis2

    @classmethod
    def start(cls, L: Basis2) -> "FlowState":
        red, u = reduce_with_transform(L)
        return cls(red, 0, u, L)

    def shortest_norm_sq(self) -> float:
        return self.base.b1.norm_sq()

    def original_coefficients(self, c1: int, c2: int) -> tuple[int, int]:
        """Coefficients in ``origin`` of the vector ``c1*base.b1 + c2*base.b2``."""
        (a, b), (c, d) = self.drift
        return a * c1 + b * c2, c * c1 + d * c2

    def recover_origin(self) -> Basis2:
        """``delta_{-h} base drift^{-1}``, which equals ``origin`` up to rounding."""
        (a, b), (c, d) = self.drift
        det = a * d - b * c
        ia, ib, ic, id_ = d * det, -b * det, -c * det, a * det
        s = math.exp(-self.h)
        si = math.exp(self.h)
        p1 = (self.base.b1.x1 * s, self.base.b1.x2 * si)
        p2 = (self.base.b2.x1 * s, self.base.b2.x2 * si)
        return Basis2(
            Vec2(ia * p1[0] + ic * p2[0], ia * p1[1] + ic * p2[1]),
            Vec2(ib * p1[0] + id_ * p2[0], ib * p1[1] + id_ * p2[1]),
        )


def geodesic_step(s: FlowState, k: int) -> FlowState:
    """Transport by ``delta_k`` (``|k| <= 10``) as ``|k|`` unit steps with re-reduction."""
    if abs(k) > 10:
        raise DomainError("|k| must be at most 10 per call")
    base, drift = s.base, s.drift
    sign = 1 if k > 0 else -1
    for _ in range(abs(k)):
        v1, v2 = _unit_step(base, sign)
        r1, r2, u = _reduce_with_transform(v1, v2)
        base, drift = Basis2(r1, r2), _compose(drift, u)
    return FlowState(base, s.h + k, drift, s.origin)


def transport(L: Basis2, h: int) -> FlowState:
    """FlowState of ``delta_h L`` reached by unit steps from ``L``."""
    s = FlowState.start(L)
    step = 1 if h > 0 else -1
    for _ in range(abs(h)):
        s = geodesic_step(s, step)
    return s


def exact_combination(L: Basis2, m: int, n: int) -> Vec2:
    """``m*b1 + n*b2`` correctly rounded from the exact binary values."""
    x = Fraction(L.b1.x1) * m + Fraction(L.b2.x1) * n
    y = Fraction(L.b1.x2) * m + Fraction(L.b2.x2) * n
    return Vec2(float(x), float(y))


# ---------------------------------------------------------------------------
# Batch kernels


def as_batch(bases) -> np.ndarray:
    """Stack ``Basis2`` values (or an array) into shape ``(N, 2, 2)``."""
    if isinstance(bases, Basis2):
        return np.array([bases], dtype=float)
    arr = np.asarray(bases, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[1:] != (2, 2):
        raise InvalidBasisError("batch must have shape (N, 2, 2)")
    return arr


def batch_det(B: np.ndarray) -> np.ndarray:
    return B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]


def reduce_batch(B: np.ndarray, U: np.ndarray | None = None):
    """Gauss-reduce every basis of ``B``.

    Returns the reduced batch, and when ``U`` (int64, shape ``(N, 2, 2)``, column
    convention) is supplied, the updated transform as well.
    """
    x1, y1 = B[:, 0, 0].copy(), B[:, 0, 1].copy()
    x2, y2 = B[:, 1, 0].copy(), B[:, 1, 1].copy()
    track = U is not None
    if track:
        u11, u12 = U[:, 0, 0].copy(), U[:, 0, 1].copy()
        u21, u22 = U[:, 1, 0].copy(), U[:, 1, 1].copy()
    n1 = x1 * x1 + y1 * y1
    n2 = x2 * x2 + y2 * y2
    for _ in range(MAX_REDUCTION_ITERATIONS):
        sw = n2 < n1
        if sw.any():
            x1, x2 = np.where(sw, x2, x1), np.where(sw, x1, x2)
            y1, y2 = np.where(sw, y2, y1), np.where(sw, y1, y2)
            n1, n2 = np.where(sw, n2, n1), np.where(sw, n1, n2)
            if track:
                u11, u12 = np.where(sw, u12, u11), np.where(sw, u11, u12)
                u21, u22 = np.where(sw, u22, u21), np.where(sw, u21, u22)
        mu = np.rint((x1 * x2 + y1 * y2) / n1)
        act = mu != 0
        if not act.any():
            break
        x2 = np.where(act, x2 - mu * x1, x2)
        y2 = np.where(act, y2 - mu * y1, y2)
        n2 = np.where(act, x2 * x2 + y2 * y2, n2)
        if track:
            mi = mu.astype(np.int64)
            u12 = u12 - mi * u11
            u22 = u22 - mi * u21
    else:
        raise InvalidBasisError("Gauss reduction did not terminate")
    out = np.empty_like(B)
    out[:, 0, 0], out[:, 0, 1], out[:, 1, 0], out[:, 1, 1] = x1, y1, x2, y2
    if not track:
        return out
    Uo = np.empty_like(U)
    Uo[:, 0, 0], Uo[:, 0, 1], Uo[:, 1, 0], Uo[:, 1, 1] = u11, u12, u21, u22
    return out, Uo


def step_batch(B: np.ndarray, sign: int, U: np.ndarray | None = None):
    """One unit step of ``delta_{+-1}`` on a reduced batch, then re-reduce."""
    f, g = (E, E_INV) if sign > 0 else (E_INV, E)
    C = np.empty_like(B)
    C[:, :, 0] = B[:, :, 0] * f
    C[:, :, 1] = B[:, :, 1] * g
    return reduce_batch(C, U)


def canonical_batch(B: np.ndarray):
    """Canonical shortest vectors of a reduced batch.

    Returns ``(vec, c)`` with ``vec`` of shape ``(N, 2)`` and ``c`` the integer
    coefficients (shape ``(N, 2)``) in the reduced basis.  Same tie-breaks as
    :func:`canonical_shortest`.
    """
    coeffs = np.array([(1, 0), (0, 1), (1, -1), (1, 1)], dtype=np.int64)
    xs = np.stack([c1 * B[:, 0, 0] + c2 * B[:, 1, 0] for c1, c2 in coeffs], axis=1)
    ys = np.stack([c1 * B[:, 0, 1] + c2 * B[:, 1, 1] for c1, c2 in coeffs], axis=1)
    ns = xs * xs + ys * ys
    tied = ns == ns.min(axis=1, keepdims=True)
    flip = (xs < 0) | ((xs == 0) & (ys < 0))
    sgn = np.where(flip, -1, 1)
    xs = np.where(flip, -xs, xs)
    ys = np.where(flip, -ys, ys)
    # lexicographic max among tied candidates
    n = B.shape[0]
    choice = np.zeros(n, dtype=np.int64)
    for j in range(1, 4):
        cur_x = xs[np.arange(n), choice]
        cur_y = ys[np.arange(n), choice]
        better = tied[:, j] & (
            ~tied[np.arange(n), choice] | (xs[:, j] > cur_x) | ((xs[:, j] == cur_x) & (ys[:, j] > cur_y))
        )
        choice = np.where(better, j, choice)
    rows = np.arange(n)
    vec = np.stack([xs[rows, choice], ys[rows, choice]], axis=1)
    c = coeffs[choice] * sgn[rows, choice][:, None]
    return vec, c
