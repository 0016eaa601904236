"""Haar sampling of unimodular lattices, torus translations and marks.

Every Monte-Carlo sample owns an :class:`RngStream` keyed by
``(master_seed, stream_index)``.  A stream hands out independent Philox
generators for each purpose (lattice, translation, marks), so the values drawn
for sample ``i`` never depend on how samples are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigError, DomainError
from .lattice_core import Basis2, Vec2, as_batch

SQRT3_HALF = math.sqrt(3.0) / 2.0
MASK64 = (1 << 64) - 1

PURPOSE_LATTICE = 0
PURPOSE_TRANSLATION = 1
PURPOSE_THETA = 2


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by ``(master_seed, stream_index)``."""

    master_seed: int
    stream_index: int

    def generator(self, purpose: int = PURPOSE_LATTICE) -> np.random.Generator:
        key = (self.master_seed & MASK64) | ((self.stream_index & MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, purpose]))


@dataclass(frozen=True)
class ThetaDist:
    """Symmetric compactly supported law of the marks."""

    kind: str = "rademacher"
    half_width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rademacher", "uniform_symmetric"):
            raise ConfigError(f"unknown theta distribution {self.kind!r}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ConfigError("half_width must be positive")

    @classmethod
    def parse(cls, text: str) -> "ThetaDist":
        """Parse ``rademacher`` or ``uniform:<a>``."""
        text = text.strip()
        if text == "rademacher":
            return cls()
        if text.startswith("uniform:"):
            try:
                a = float(text.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad theta spec {text!r}") from exc
            return cls("uniform_symmetric", a)
        raise ConfigError(f"bad theta spec {text!r}")

    def __str__(self) -> str:
        return "rademacher" if self.kind == "rademacher" else f"uniform:{self.half_width!r}"

    def mean_abs(self) -> float:
        return 1.0 if self.kind == "rademacher" else self.half_width / 2.0


def _fundamental_point(g: np.random.Generator) -> tuple[float, float]:
    while True:
        u = g.random(2)
        x = u[0] - 0.5
        y = SQRT3_HALF / (1.0 - u[1])
        if x * x + y * y >= 1.0:
            return float(x), float(y)


def sample_fundamental_point(rng: RngStream) -> tuple[float, float]:
    """Point of ``{|x| <= 1/2, x^2 + y^2 >= 1}`` with density proportional to ``1/y^2``."""
    return _fundamental_point(rng.generator(PURPOSE_LATTICE))


def _haar_parameters(rng: RngStream) -> tuple[float, float, float]:
    g = rng.generator(PURPOSE_LATTICE)
    x, y = _fundamental_point(g)
    phi = 2.0 * math.pi * float(g.random())
    return x, y, phi


def haar_batch_from_parameters(x, y, phi) -> np.ndarray:
    """Bases ``(1/sqrt(y)) Rot(phi) [(1,0), (x,y)]`` as an ``(N, 2, 2)`` batch."""
    x, y, phi = (np.asarray(v, dtype=float) for v in (x, y, phi))
    s = 1.0 / np.sqrt(y)
    c, sn = np.cos(phi), np.sin(phi)
    B = np.empty((x.size, 2, 2))
    B[:, 0, 0] = c * s
    B[:, 0, 1] = sn * s
    B[:, 1, 0] = (c * x - sn * y) * s
    B[:, 1, 1] = (sn * x + c * y) * s
    return B


def sample_haar_batch(master_seed: int, indices: Iterable[int]) -> np.ndarray:
    """Haar lattices for the given stream indices, shape ``(N, 2, 2)``."""
    params = [_haar_parameters(RngStream(master_seed, int(i))) for i in indices]
    if not params:
        return np.empty((0, 2, 2))
    x, y, phi = zip(*params)
    return haar_batch_from_parameters(x, y, phi)


def sample_haar_lattice(rng: RngStream) -> Basis2:
    """Haar-distributed unimodular lattice (uniform rotation of a fundamental-domain shape)."""
    B = haar_batch_from_parameters(*([v] for v in _haar_parameters(rng)))
    return Basis2.from_rows(B[0])


def sample_translation(rng: RngStream, L: Basis2) -> Vec2:
    """``u*b1 + v*b2`` with ``u, v`` independent uniform on ``[0, 1)``."""
    X = translation_batch(rng.master_seed, [rng.stream_index], as_batch(L))
    return Vec2(float(X[0, 0]), float(X[0, 1]))


def translation_batch(master_seed: int, indices: Iterable[int], B: np.ndarray) -> np.ndarray:
    uv = np.array([RngStream(master_seed, int(i)).generator(PURPOSE_TRANSLATION).random(2) for i in indices])
    uv = uv.reshape(-1, 2)
    return uv[:, :1] * B[:, 0, :] + uv[:, 1:] * B[:, 1, :]


def sample_theta(rng: RngStream, dist: ThetaDist, count: int) -> np.ndarray:
    """``count`` i.i.d. marks drawn from ``dist``."""
    if count < 0:
        raise DomainError("count must be non-negative")
    g = rng.generator(PURPOSE_THETA)
    if dist.kind == "rademacher":
        return 2.0 * g.integers(0, 2, size=count).astype(float) - 1.0
    return g.uniform(-dist.half_width, dist.half_width, size=count)


def theta_batch(master_seed: int, indices: Iterable[int], dist: ThetaDist, count: int) -> np.ndarray:
    return np.array([sample_theta(RngStream(master_seed, int(i)), dist, count) for i in indices]).reshape(-1, count)


def siegel_ball_count(B: np.ndarray, radius: float) -> np.ndarray:
    """Number of primitive lattice vectors of norm ``<= radius`` for each basis.

    For every coefficient ``n`` of ``b2`` the admissible ``m`` form an interval;
    primitive vectors in it are counted by Moebius inversion over divisors of ``n``.
    """
    B = as_batch(B)
    x1, y1, x2, y2 = B[:, 0, 0], B[:, 0, 1], B[:, 1, 0], B[:, 1, 1]
    n1 = x1 * x1 + y1 * y1
    dot = x1 * x2 + y1 * y2
    n2 = x2 * x2 + y2 * y2
    r2 = radius * radius
    n_bound = int(math.floor(radius * math.sqrt(float(n1.max())))) if len(B) else 0
    total = np.zeros(len(B), dtype=np.int64)
    for n in range(-n_bound, n_bound + 1):
        # |m b1 + n b2|^2 <= r^2  <=>  n1 m^2 + 2 n dot m + n^2 n2 - r^2 <= 0
        disc = (n * dot) ** 2 - n1 * (n * n * n2 - r2)
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        lo = np.ceil((-n * dot - sq) / n1)
        hi = np.floor((-n * dot + sq) / n1)
        if n == 0:
            cnt = ((lo <= 1) & (hi >= 1)).astype(np.int64) + ((lo <= -1) & (hi >= -1)).astype(np.int64)
        else:
            cnt = np.zeros(len(B), dtype=np.int64)
            for d, mu in _moebius_divisors(abs(n)):
                cnt += mu * (np.floor(hi / d) - np.ceil(lo / d) + 1).astype(np.int64).clip(min=0)
        total += np.where(ok & (hi >= lo), cnt, 0)
    return total


def _moebius_divisors(n: int) -> list[tuple[int, int]]:
    primes = []
    k, p = n, 2
    while p * p <= k:
        if k % p == 0:
            primes.append(p)
            while k % p == 0:
                k //= p
        p += 1
    if k > 1:
        primes.append(k)
    out = []
    for mask in range(1 << len(primes)):
        d, sign = 1, 1
        for j, q in enumerate(primes):
            if mask >> j & 1:
                d *= q
                sign = -sign
        out.append((d, sign))
    return out
