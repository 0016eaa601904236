"""Statistical verdicts for Cauchy limits and Poisson hit processes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special, stats as sps

from .errors import DomainError, UnstableGridError
from .geodesic_process import MarkedPointProcess, orbit_norms_batch

ZETA2_INV = 6.0 / math.pi**2
POISSON_INTENSITY_D = ZETA2_INV * (
    math.acos(1.0 / math.sqrt(math.e**2 + 1.0)) - math.acos(math.e / math.sqrt(math.e**2 + 1.0))
)
DEFAULT_U_GRID = tuple(round(0.1 * k, 1) for k in range(1, 21))

# acceptance thresholds of the Cauchy battery
SIGN_P_MIN = 0.01
ECF_R2_MIN = 0.99
HILL_RANGE = (0.8, 1.25)
STABILITY_P_MIN = 0.01


@dataclass(frozen=True)
class SampleSet:
    """Values together with a label and where they came from."""

    values: np.ndarray
    label: str = ""
    seed_provenance: tuple[int, int, int] | None = None  # (seed, first index, stop index)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise DomainError("sample values must be finite")
        object.__setattr__(self, "values", v)


def _values(s) -> np.ndarray:
    if isinstance(s, SampleSet):
        return s.values
    return SampleSet(s).values


class KSResult(NamedTuple):
    statistic: float
    pvalue: float


def cauchy_scale_median(s) -> float:
    """Median of ``|X|``, the scale of a centred Cauchy law."""
    v = _values(s)
    if v.size == 0:
        raise DomainError("empty sample")
    return float(np.median(np.abs(v)))


def ecf_log_slope(s, u_grid: Sequence[float] = DEFAULT_U_GRID) -> tuple[float, float]:
    """Least-squares slope and ``R^2`` of ``-log |phi_hat(u)|`` against ``u``.

    Raises
    ------
    UnstableGridError
        If ``|phi_hat|`` drops below ``1e-3`` on the grid.
    """
    v = _values(s)
    u = np.asarray(u_grid, dtype=float)
    if u.size < 2 or np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise DomainError("u_grid must be positive and increasing")
    phi = np.abs(np.array([np.mean(np.exp(1j * uk * v)) for uk in u]))
    if np.any(phi < 1e-3):
        raise UnstableGridError("|phi_hat| below 1e-3 on the grid")
    y = -np.log(np.minimum(phi, 1.0))
    uc = u - u.mean()
    slope = float(uc @ (y - y.mean()) / (uc @ uc))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return slope, 1.0
    ss_res = float(((y - y.mean() - slope * uc) ** 2).sum())
    return slope, max(0.0, 1.0 - ss_res / ss_tot)


def ks_statistic(s, cdf: Callable[[np.ndarray], np.ndarray]) -> KSResult:
    """Kolmogorov distance to ``cdf`` with its asymptotic p-value.

    The p-value is the Kolmogorov series at ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) D``.
    """
    v = np.sort(_values(s))
    n = v.size
    if n == 0:
        raise DomainError("empty sample")
    F = np.asarray(cdf(v), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    d = min(max(d, 0.0), 1.0)
    sn = math.sqrt(n)
    return KSResult(d, float(special.kolmogorov((sn + 0.12 + 0.11 / sn) * d)))


def hill_tail_index(s, top_fraction: float = 0.05) -> float:
    """Hill estimator of the tail index of ``|X|`` using the top ``k = floor(top_fraction n)`` values."""
    v = _values(s)
    if v.size < 100:
        raise DomainError("need at least 100 samples")
    if not 0 < top_fraction <= 0.2:
        raise DomainError("top_fraction must lie in (0, 0.2]")
    k = int(top_fraction * v.size)
    x = np.sort(np.abs(v))[::-1]
    if k < 5 or x[k] <= 0:
        raise DomainError("too few positive exceedances")
    denom = float(np.sum(np.log(x[:k] / x[k])))
    # tied top order statistics: no tail at all
    return k / denom if denom > 0 else math.inf


def symmetry_sign_test(s) -> float:
    """Two-sided binomial test of ``P(X > 0) = 1/2`` (zeros dropped)."""
    v = _values(s)
    pos, neg = int(np.sum(v > 0)), int(np.sum(v < 0))
    if pos + neg == 0:
        return 1.0
    return float(sps.binomtest(pos, pos + neg, 0.5).pvalue)


def averaging_stability(s) -> KSResult:
    """Two-sample KS between the first half and pairwise means of the second half.

    A centred Cauchy law is the symmetric law left invariant by pairwise
    averaging; splitting the sample keeps the two compared samples independent.
    """
    v = _values(s)
    if v.size < 8:
        raise DomainError("need at least 8 samples")
    h = v.size // 2
    first, second = v[:h], v[h:]
    second = second[: second.size // 2 * 2]
    means = 0.5 * (second[0::2] + second[1::2])
    r = sps.ks_2samp(first, means, method="asymp")
    return KSResult(float(r.statistic), float(r.pvalue))


@dataclass(frozen=True)
class CauchyVerdict:
    scale_median: float
    ecf_slope: float
    ecf_r2: float
    symmetry_p: float
    stability_ks: float
    stability_p: float
    hill_alpha: float
    n: int = 0
    ecf_error: str = ""

    def checks(self) -> dict[str, bool]:
        return {
            "sign": self.symmetry_p > SIGN_P_MIN,
            "ecf": self.ecf_r2 > ECF_R2_MIN,
            "hill": HILL_RANGE[0] <= self.hill_alpha <= HILL_RANGE[1],
            "stability": self.stability_p > STABILITY_P_MIN,
        }

    def passed(self) -> bool:
        return all(self.checks().values())

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update({f"pass_{k}": v for k, v in self.checks().items()})
        d["pass"] = self.passed()
        return d


def cauchy_verdict(s, u_grid: Sequence[float] = DEFAULT_U_GRID, top_fraction: float = 0.05) -> CauchyVerdict:
    """Law-shape battery: symmetry, ECF linearity, tail index, averaging stability.

    The ECF fit runs on the sample divided by its median scale so that the fixed
    grid probes the same part of the characteristic function whatever the scale.
    """
    v = _values(s)
    scale = cauchy_scale_median(v)
    err = ""
    try:
        slope, r2 = ecf_log_slope(v / scale if scale > 0 else v, u_grid)
    except UnstableGridError as exc:
        slope, r2, err = float("nan"), 0.0, str(exc)
    st = averaging_stability(v)
    return CauchyVerdict(
        scale_median=scale,
        ecf_slope=slope,
        ecf_r2=r2,
        symmetry_p=symmetry_sign_test(v),
        stability_ks=st.statistic,
        stability_p=st.pvalue,
        hill_alpha=hill_tail_index(v, top_fraction),
        n=int(v.size),
        ecf_error=err,
    )


# ---------------------------------------------------------------------------
# Poisson processes


@dataclass(frozen=True)
class PoissonVerdict:
    mean_count: float
    expected_mean: float
    count_chi2_p: float
    position_ks_p: float
    disjoint_window_corr: float
    n_realizations: int = 0

    def checks(self, mean_tol: float = 0.08, p_min: float = 0.001, corr_max: float = 0.05) -> dict[str, bool]:
        return {
            "mean": abs(self.mean_count - self.expected_mean) <= mean_tol * self.expected_mean,
            "chi2": self.count_chi2_p > p_min,
            "ks": self.position_ks_p > p_min,
            "corr": abs(self.disjoint_window_corr) < corr_max,
        }

    def passed(self, **kw) -> bool:
        return all(self.checks(**kw).values())

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update({f"pass_{k}": v for k, v in self.checks().items()})
        d["pass"] = self.passed()
        return d


def poisson_count_chi2(counts: np.ndarray) -> float:
    """χ² p-value of a count histogram against the Poisson law with the sample mean.

    Cells are merged from both ends until each expects at least 5 counts; one
    extra degree of freedom is spent on the fitted mean.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    lam = counts.mean()
    if lam == 0:
        return 1.0 if np.all(counts == 0) else 0.0
    kmax = int(max(counts.max(), lam + 10 * math.sqrt(lam) + 10))
    k = np.arange(kmax + 1)
    probs = sps.poisson.pmf(k, lam)
    probs[-1] += sps.poisson.sf(kmax, lam)
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = n * probs
    cells_o, cells_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if cells_e:
        cells_o[-1] += acc_o
        cells_e[-1] += acc_e
    dof = len(cells_e) - 2
    if dof < 1:
        return 1.0
    o, e = np.array(cells_o), np.array(cells_e)
    chi2 = float(((o - e) ** 2 / e).sum())
    return float(sps.chi2.sf(chi2, dof))


def poisson_battery(
    processes: Sequence[MarkedPointProcess | Sequence[float]],
    window: float,
    intensity_expected: float,
) -> PoissonVerdict:
    """Mean count, count χ², position uniformity and half-window correlation on ``(0, window]``.

    Each process may be a :class:`MarkedPointProcess` or a plain sequence of positions.
    """
    if len(processes) < 1000:
        raise DomainError("need at least 1000 realizations")
    positions = [p.xis if isinstance(p, MarkedPointProcess) else np.asarray(p, dtype=float) for p in processes]
    positions = [x[(x > 0) & (x <= window)] for x in positions]
    counts = np.array([x.size for x in positions])
    half = window / 2.0
    left = np.array([np.sum(x <= half) for x in positions])
    right = counts - left
    pooled = np.concatenate(positions) / window if counts.sum() else np.zeros(0)
    ks_p = ks_statistic(pooled, lambda u: np.clip(u, 0.0, 1.0)).pvalue if pooled.size else 0.0
    if left.std() == 0 or right.std() == 0:
        corr = float("nan")
    else:
        corr = float(np.corrcoef(left, right)[0, 1])
    return PoissonVerdict(
        mean_count=float(counts.mean()),
        expected_mean=float(intensity_expected * window),
        count_chi2_p=poisson_count_chi2(counts),
        position_ks_p=float(ks_p),
        disjoint_window_corr=corr,
        n_realizations=len(processes),
    )


# ---------------------------------------------------------------------------
# Pair correlation along the orbit


def pair_correlation_model(x: float, gap, d1: float, d2: float):
    """``d1 x^2 + d2 x arccos(tanh gap)``."""
    return d1 * x * x + d2 * x * np.arccos(np.tanh(np.asarray(gap, dtype=float)))


@dataclass(frozen=True)
class PairCorrelationTable:
    x: float
    n: int
    gaps: tuple[int, ...]
    marginal: float
    joint: np.ndarray
    joint_se: np.ndarray
    product: np.ndarray
    z_independence: np.ndarray
    d1: float
    d2: float
    fitted: np.ndarray
    monotone: bool

    def rows(self) -> list[dict]:
        return [
            {
                "gap": g,
                "joint": float(self.joint[i]),
                "joint_se": float(self.joint_se[i]),
                "product": float(self.product[i]),
                "z_independence": float(self.z_independence[i]),
                "fitted": float(self.fitted[i]),
            }
            for i, g in enumerate(self.gaps)
        ]


def pair_correlation_check(lattices, T: int, b: float, gaps: Sequence[int]) -> PairCorrelationTable:
    """Empirical ``P(T|delta_0 L|^2 <= b, T|delta_g L|^2 <= b)`` per gap and a fit of the arccos form.

    By stationarity of the flow the pair ``(0, g)`` represents every pair at
    distance ``g``; each lattice contributes one independent observation.
    The fit is weighted least squares in ``(d1, d2)``; the fitted curve is
    monotone decreasing in the gap exactly when ``d2 > 0``.
    """
    x = b / T
    if not 0 < x < 1:
        raise DomainError("need 0 < b/T < 1")
    gaps = tuple(int(g) for g in gaps)
    if any(g < 0 for g in gaps):
        raise DomainError("gaps must be non-negative")
    norms = orbit_norms_batch(lattices, 0, max(gaps))
    hit = norms <= x
    n = hit.shape[0]
    p0 = hit[:, 0].mean()
    joint = np.array([(hit[:, 0] & hit[:, g]).mean() for g in gaps])
    pg = np.array([hit[:, g].mean() for g in gaps])
    se = np.sqrt(np.maximum(joint * (1 - joint), 1.0 / n) / n)
    product = p0 * pg
    z = (joint - product) / se
    A = np.stack([np.full(len(gaps), x * x), x * np.arccos(np.tanh(np.asarray(gaps, dtype=float)))], axis=1)
    w = 1.0 / se
    (d1, d2), *_ = np.linalg.lstsq(A * w[:, None], joint * w, rcond=None)
    fitted = A @ np.array([d1, d2])
    return PairCorrelationTable(
        x=x,
        n=n,
        gaps=gaps,
        marginal=float(p0),
        joint=joint,
        joint_se=se,
        product=product,
        z_independence=z,
        d1=float(d1),
        d2=float(d2),
        fitted=fitted,
        monotone=bool(d2 > 0),
    )
