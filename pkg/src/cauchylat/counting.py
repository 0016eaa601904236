"""Exact lattice-point counts in dilated, translated squares.

The region is the closed square ``[X1 - t a, X1 + t a] x [X2 - t a, X2 + t a]``.
:func:`count_points` walks the rows ``n*b2 + Z*b1`` of the reduced basis and
counts each row with interval arithmetic, then settles the two end points of
every row with the same membership predicate the brute-force oracle uses.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SizeError
from .lattice_core import Basis2, Vec2, check_unimodular, gauss_reduce

COUNT_GUARD = 1e6
BRUTE_FORCE_GUARD = 200.0


class Square(NamedTuple):
    """Square of half-side ``a`` centred at the origin, dilated by ``t``, shifted by ``X``."""

    half_side: float
    dilation: float
    translation: Vec2 = Vec2(0.0, 0.0)

    @property
    def radius(self) -> float:
        return self.dilation * self.half_side

    def area(self) -> float:
        return 4.0 * self.half_side * self.half_side * self.dilation * self.dilation

    def bounds(self) -> tuple[float, float, float, float]:
        s = self.radius
        X1, X2 = self.translation
        return X1 - s, X1 + s, X2 - s, X2 + s


class CountResult(NamedTuple):
    count: int
    error: float
    t: float
    log_t: float

    @property
    def normalized(self) -> float:
        return self.error / self.log_t


def _validate(sq: Square) -> None:
    if not (sq.half_side > 0 and sq.dilation > 0):
        raise DomainError("half_side and dilation must be positive")


def _inside(m, n, b1: Vec2, b2: Vec2, box) -> np.ndarray:
    lo1, hi1, lo2, hi2 = box
    x = m * b1.x1 + n * b2.x1
    y = m * b1.x2 + n * b2.x2
    return (lo1 <= x) & (x <= hi1) & (lo2 <= y) & (y <= hi2)


def count_points(L: Basis2, sq: Square) -> int:
    """Exact number of lattice points in the closed square.

    Cost is linear in the number of rows, about ``2 sqrt(2) t a |b1|``.

    Raises
    ------
    SizeError
        If ``t*a > 1e6``.
    """
    _validate(sq)
    if sq.radius > COUNT_GUARD:
        raise SizeError("t*a exceeds the counting guard")
    red = gauss_reduce(L)
    b1, b2 = red.b1, red.b2
    box = sq.bounds()
    lo1, hi1, lo2, hi2 = box
    det = b1.x1 * b2.x2 - b1.x2 * b2.x1
    # n = det(b1, p) / det(b1, b2) is affine in p: take its range over the corners
    corners = [(lo1, lo2), (lo1, hi2), (hi1, lo2), (hi1, hi2)]
    ns = [(b1.x1 * py - b1.x2 * px) / det for px, py in corners]
    n = np.arange(math.floor(min(ns)) - 1, math.ceil(max(ns)) + 2, dtype=np.int64).astype(float)

    m_lo = np.full(n.shape, -np.inf)
    m_hi = np.full(n.shape, np.inf)
    keep = np.ones(n.shape, dtype=bool)
    for c1, c2, lo, hi in ((b1.x1, b2.x1, lo1, hi1), (b1.x2, b2.x2, lo2, hi2)):
        off = n * c2
        if c1 == 0.0:
            keep &= (lo <= off) & (off <= hi)
            continue
        a, b = (lo - off) / c1, (hi - off) / c1
        if c1 < 0:
            a, b = b, a
        m_lo = np.maximum(m_lo, a)
        m_hi = np.minimum(m_hi, b)
    n, m_lo, m_hi = n[keep], np.ceil(m_lo[keep]), np.floor(m_hi[keep])
    # settle the row ends with the exact membership predicate
    for _ in range(2):
        grow = _inside(m_lo - 1, n, b1, b2, box)
        m_lo = np.where(grow, m_lo - 1, m_lo)
        shrink = (m_lo <= m_hi) & ~_inside(m_lo, n, b1, b2, box)
        m_lo = np.where(shrink, m_lo + 1, m_lo)
        grow = _inside(m_hi + 1, n, b1, b2, box)
        m_hi = np.where(grow, m_hi + 1, m_hi)
        shrink = (m_lo <= m_hi) & ~_inside(m_hi, n, b1, b2, box)
        m_hi = np.where(shrink, m_hi - 1, m_hi)
    return int(np.maximum(m_hi - m_lo + 1, 0).sum())


def brute_force_count(L: Basis2, sq: Square) -> int:
    """Count by enumerating every coefficient pair in a bounding box (oracle).

    Raises
    ------
    SizeError
        If ``t*a > 200``.
    """
    _validate(sq)
    if sq.radius > BRUTE_FORCE_GUARD:
        raise SizeError("t*a exceeds the brute-force guard")
    check_unimodular(L)
    box = sq.bounds()
    lo1, hi1, lo2, hi2 = box
    M = np.array([[L.b1.x1, L.b2.x1], [L.b1.x2, L.b2.x2]])
    inv = np.linalg.inv(M)
    coef = inv @ np.array([[lo1, lo1, hi1, hi1], [lo2, hi2, lo2, hi2]])
    mr = np.arange(math.floor(coef[0].min()) - 1, math.ceil(coef[0].max()) + 2)
    nr = np.arange(math.floor(coef[1].min()) - 1, math.ceil(coef[1].max()) + 2)
    mm, nn = np.meshgrid(mr.astype(float), nr.astype(float), indexing="ij")
    return int(_inside(mm, nn, L.b1, L.b2, box).sum())


def error_R(L: Basis2, sq: Square) -> CountResult:
    """Count together with ``R = N - 4 a^2 t^2`` and ``log t``."""
    if not sq.dilation > 1:
        raise DomainError("t must exceed 1")
    n = count_points(L, sq)
    return CountResult(n, n - sq.area(), sq.dilation, math.log(sq.dilation))
