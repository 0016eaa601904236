"""Command-line experiment runner.

Subcommands
-----------
tail-law        P(|L|^-2 > a) for a in {10, 20, 50} against 3/(pi a).
                CSV columns: a, hits, samples, p_hat, p_expected, sigma, z, pass
ergodic-cauchy  S = (1/T) sum theta_t / |delta_t L|^2 per sample, Cauchy battery.
                CSV columns: index, S
counting-error  R/log t for lattice-point counts in squares, Cauchy battery per t,
                optional Fourier-sum columns at t-, t, t+.
                CSV columns: index, t, count, R, R_over_log_t[, sigma_minus, sigma, sigma_plus]
poisson         A2 hit process on (0, 1/eps], Poisson battery, optional pair-correlation table.
                CSV columns: index, count, xis (';'-separated)
selftest        Oracle-equivalence suites.

Every output starts with a ``#`` header block (version, experiment, anchor,
config hash, seed, config echo).  Verdicts follow the records as ``# verdict``
lines.  Exit codes: 0 all batteries passed, 1 some battery failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .counting import Square, count_points
from .errors import CauchylatError, ConfigError
from .geodesic_process import ergodic_sum_batch, shifted_t, sigma_batch, tau, window_half_width, xi_gamma_batch
from .lattice_core import IDENTITY, Basis2, Vec2, reduce_batch
from .sampling import ThetaDist, sample_haar_batch, theta_batch, translation_batch
from .stats import POISSON_INTENSITY_D, cauchy_verdict, pair_correlation_check, poisson_battery

EXPERIMENTS = ("tail-law", "ergodic-cauchy", "counting-error", "poisson")
ANCHORS = {
    "tail-law": "tail law P(|L|^-2 > a) = 3/(pi a)",
    "ergodic-cauchy": "ergodic sum (1/T) sum theta_t/|delta_t L|^2 tends to a centred Cauchy law",
    "counting-error": "R(tP+X, L)/log t tends to a centred Cauchy law",
    "poisson": "normalised orbit minima form a Poisson process of intensity D on (0, 1/eps]",
}
DEFAULT_SAMPLES = {"tail-law": 1_000_000, "ergodic-cauchy": 10_000, "counting-error": 4_000, "poisson": 5_000}
CHUNK = {"tail-law": 4096, "ergodic-cauchy": 512, "counting-error": 64, "poisson": 512}
TAIL_LEVELS = (10.0, 20.0, 50.0)
E10 = math.exp(10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1
    samples: int | None = None
    T: int = 2000
    t_values: tuple[float, ...] = (E10,)
    epsilon: float = 0.1
    a: float = 0.5
    theta: ThetaDist = ThetaDist()
    beta: float = 1.0
    m_max: int = 10_000
    workers: int = 1
    out: str | None = None
    format: str = "csv"
    gaps: tuple[int, ...] = ()
    lattice: str = "haar"
    X: tuple[float, float] | None = None
    sigma: bool = True
    pair_x: float = 0.2

    def echo(self) -> dict:
        """Fields that determine the output (worker count and destination excluded)."""
        d = asdict(self)
        for k in ("workers", "out", "format"):
            d.pop(k)
        d["theta"] = str(self.theta)
        d["t_values"] = list(self.t_values)
        d["gaps"] = list(self.gaps)
        d["X"] = None if self.X is None else list(self.X)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# configuration


def _parse_bool(v: str) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        items = [x for s in v for x in str(s).split(",")]
    else:
        items = str(v).split(",")
    return tuple(float(x) for x in items if x.strip())


CONVERTERS = {
    "seed": int,
    "samples": int,
    "T": int,
    "t_values": _floats,
    "epsilon": float,
    "a": float,
    "theta": lambda v: v if isinstance(v, ThetaDist) else ThetaDist.parse(str(v)),
    "beta": float,
    "m_max": int,
    "workers": int,
    "out": str,
    "format": str,
    "gaps": lambda v: tuple(int(x) for x in _floats(v)),
    "lattice": str,
    "X": lambda v: _parse_X(v),
    "sigma": lambda v: v if isinstance(v, bool) else _parse_bool(v),
    "pair_x": float,
}
KEY_ALIASES = {"t": "t_values", "m-max": "m_max", "pair-x": "pair_x"}


def _parse_X(v) -> tuple[float, float]:
    vals = _floats(v)
    if len(vals) == 1:
        return (vals[0], vals[0])
    if len(vals) != 2:
        raise ConfigError("X takes one or two numbers")
    return vals


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    out = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        k = KEY_ALIASES.get(k, k)
        if k not in CONVERTERS:
            raise ConfigError(f"{path}:{no}: unknown key {k!r}")
        out[k] = v
    return out


def build_config(experiment: str, file_values: dict, flag_values: dict) -> ExperimentConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    merged = {}
    env = os.environ.get("CAUCHYLAT_WORKERS")
    if env:
        merged["workers"] = env
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    kwargs = {}
    for k, v in merged.items():
        try:
            kwargs[k] = CONVERTERS[k](v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {v!r}") from exc
    cfg = ExperimentConfig(**kwargs)
    if cfg.samples is None:
        cfg = replace(cfg, samples=DEFAULT_SAMPLES[experiment])
    validate(experiment, cfg)
    return cfg


def validate(experiment: str, cfg: ExperimentConfig) -> None:
    if cfg.samples < 1:
        raise ConfigError("samples must be at least 1")
    if not 0 < cfg.epsilon < 1:
        raise ConfigError("epsilon must lie in (0, 1)")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.m_max < 1:
        raise ConfigError("m_max must be at least 1")
    if cfg.a <= 0:
        raise ConfigError("a must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if experiment == "ergodic-cauchy" and cfg.T < 1:
        raise ConfigError("T must be at least 1")
    if experiment == "counting-error":
        if not cfg.t_values or any(not t > math.e for t in cfg.t_values):
            raise ConfigError("every t must exceed e")
        if cfg.lattice not in ("haar", "identity"):
            raise ConfigError("lattice must be haar or identity")
    if experiment == "poisson":
        if cfg.T < 500:
            raise ConfigError("poisson needs T >= 500")
        if cfg.samples < 1000:
            raise ConfigError("poisson needs at least 1000 samples")
        if any(g < 0 for g in cfg.gaps):
            raise ConfigError("gaps must be non-negative")
        if not 0 < cfg.pair_x < 1:
            raise ConfigError("pair_x must lie in (0, 1)")


# ---------------------------------------------------------------------------
# per-chunk work (module level so that worker processes can import it)


def _chunk_tail_law(cfg: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    B = reduce_batch(sample_haar_batch(cfg.seed, range(start, stop)))
    return 1.0 / (B[:, 0, 0] ** 2 + B[:, 0, 1] ** 2)


def _chunk_ergodic(cfg: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    idx = range(start, stop)
    B = sample_haar_batch(cfg.seed, idx)
    th = theta_batch(cfg.seed, idx, cfg.theta, cfg.T)
    return ergodic_sum_batch(B, th)


def _lattices_and_shifts(cfg: ExperimentConfig, start: int, stop: int):
    idx = range(start, stop)
    if cfg.lattice == "identity":
        B = np.repeat(IDENTITY.as_array()[None], stop - start, axis=0)
    else:
        B = sample_haar_batch(cfg.seed, idx)
    if cfg.X is not None:
        X = np.tile(np.asarray(cfg.X, dtype=float), (stop - start, 1))
    else:
        X = translation_batch(cfg.seed, idx, B)
    return B, X


def _chunk_counting(cfg: ExperimentConfig, start: int, stop: int) -> list[list]:
    B, X = _lattices_and_shifts(cfg, start, stop)
    rows = []
    sig = {}
    if cfg.sigma:
        for t in cfg.t_values:
            sig[t] = sigma_batch(B, X, t, cfg.a, cfg.epsilon, cfg.beta, cfg.m_max, (-1, 0, 1))
    for k in range(stop - start):
        L = Basis2.from_rows(B[k])
        for t in cfg.t_values:
            n = count_points(L, Square(cfg.a, t, Vec2(*X[k])))
            R = n - 4.0 * cfg.a * cfg.a * t * t
            row = [start + k, t, n, R, R / math.log(t)]
            if cfg.sigma:
                row += [float(v) for v in sig[t][k]]
            rows.append(row)
    return rows


def _chunk_poisson(cfg: ExperimentConfig, start: int, stop: int):
    idx = range(start, stop)
    B = sample_haar_batch(cfg.seed, idx)
    W = window_half_width(cfg.T, cfg.epsilon)
    th = theta_batch(cfg.seed, idx, cfg.theta, cfg.T + 2 * W)
    return B, xi_gamma_batch(B, th, cfg.T, cfg.epsilon)


CHUNK_FUNCS = {
    "tail-law": _chunk_tail_law,
    "ergodic-cauchy": _chunk_ergodic,
    "counting-error": _chunk_counting,
    "poisson": _chunk_poisson,
}


def run_chunks(experiment: str, cfg: ExperimentConfig) -> list:
    """Run fixed-size chunks of sample indices; results come back in index order.

    Chunk boundaries depend only on the experiment, never on the worker count,
    so every sample is computed by the same vectorised operations either way.
    """
    size = CHUNK[experiment]
    bounds = [(s, min(s + size, cfg.samples)) for s in range(0, cfg.samples, size)]
    func = CHUNK_FUNCS[experiment]
    if cfg.workers == 1 or len(bounds) == 1:
        return [func(cfg, s, e) for s, e in bounds]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(func, cfg, s, e) for s, e in bounds]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# experiments


@dataclass
class Report:
    experiment: str
    config: ExperimentConfig
    columns: list[str]
    records: list[list]
    verdicts: list[dict] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    extra_header: dict = field(default_factory=dict)

    def passed(self) -> bool:
        return all(v.get("pass", True) for v in self.verdicts)


def run_tail_law(cfg: ExperimentConfig) -> Report:
    inv = np.concatenate(run_chunks("tail-law", cfg))
    n = inv.size
    records, verdicts = [], []
    for a in TAIL_LEVELS:
        hits = int(np.sum(inv > a))
        p_hat = hits / n
        p = 3.0 / (math.pi * a)
        sigma = math.sqrt(p * (1 - p) / n)
        z = (p_hat - p) / sigma
        ok = abs(z) <= 3.0
        records.append([a, hits, n, p_hat, p, sigma, z, ok])
        verdicts.append({"name": f"tail a={a:g}", "z": z, "pass": ok})
    cols = ["a", "hits", "samples", "p_hat", "p_expected", "sigma", "z", "pass"]
    return Report("tail-law", cfg, cols, records, verdicts)


def _cauchy_row(name: str, values: np.ndarray) -> dict:
    if values.size < 100:
        return {"name": name, "note": "fewer than 100 samples: battery skipped"}
    return {"name": name, **cauchy_verdict(values).as_dict()}


def run_ergodic_cauchy(cfg: ExperimentConfig) -> Report:
    S = np.concatenate(run_chunks("ergodic-cauchy", cfg))
    records = [[i, float(s)] for i, s in enumerate(S)]
    return Report("ergodic-cauchy", cfg, ["index", "S"], records, [_cauchy_row("S", S)])


def run_counting_error(cfg: ExperimentConfig) -> Report:
    rows = [r for chunk in run_chunks("counting-error", cfg) for r in chunk]
    cols = ["index", "t", "count", "R", "R_over_log_t"]
    if cfg.sigma:
        cols += ["sigma_minus", "sigma", "sigma_plus"]
    verdicts = []
    extra = {}
    deterministic = cfg.lattice == "identity" and cfg.X is not None
    for t in cfg.t_values:
        extra[f"tau[t={t!r}]"] = tau(t)
        extra[f"t_minus[t={t!r}]"] = shifted_t(t, cfg.beta, -1)
        extra[f"t_plus[t={t!r}]"] = shifted_t(t, cfg.beta, 1)
        if deterministic:
            continue
        sel = np.array([r for r in rows if r[1] == t], dtype=float)
        verdicts.append(_cauchy_row(f"R/log t at t={t!r}", sel[:, 4]))
        if cfg.sigma:
            for j, lab in zip((5, 6, 7), ("t-", "t", "t+")):
                verdicts.append(_cauchy_row(f"sigma at {lab}, t={t!r}", sel[:, j]))
            from scipy.stats import ks_2samp

            d = float(ks_2samp(sel[:, 5], sel[:, 7]).statistic)
            verdicts.append({"name": f"sigma t+ vs t- KS distance, t={t!r}", "ks_distance": d, "pass": d < 0.05})
    return Report("counting-error", cfg, cols, rows, verdicts, extra_header=extra)


def run_poisson_process(cfg: ExperimentConfig) -> Report:
    chunks = run_chunks("poisson", cfg)
    procs = [p for _, ps in chunks for p in ps]
    window = 1.0 / cfg.epsilon
    records = [[i, len(p), ";".join(repr(float(x)) for x in p.xis)] for i, p in enumerate(procs)]
    v = poisson_battery(procs, window, POISSON_INTENSITY_D)
    verdicts = [{"name": "poisson", **v.as_dict()}]
    tables = {}
    if cfg.gaps:
        B = np.concatenate([b for b, _ in chunks])
        pc = pair_correlation_check(B, cfg.T, cfg.pair_x * cfg.T, cfg.gaps)
        tables["pair_correlation"] = pc.rows()
        verdicts.append({"name": "pair-correlation fit", "d1": pc.d1, "d2": pc.d2, "monotone": pc.monotone, "pass": pc.monotone})
    extra = {"intensity_D": POISSON_INTENSITY_D, "expected_mean": POISSON_INTENSITY_D * window, "window_W": window_half_width(cfg.T, cfg.epsilon)}
    return Report("poisson", cfg, ["index", "count", "xis"], records, verdicts, tables, extra)


RUNNERS = {
    "tail-law": run_tail_law,
    "ergodic-cauchy": run_ergodic_cauchy,
    "counting-error": run_counting_error,
    "poisson": run_poisson_process,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def header(report: Report) -> dict:
    cfg = report.config
    h = {
        "tool": "cauchylat",
        "version": __version__,
        "experiment": report.experiment,
        "anchor": ANCHORS[report.experiment],
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
    }
    h["config"] = cfg.echo()
    h.update(report.extra_header)
    return h


def render_csv(report: Report) -> str:
    buf = io.StringIO()
    h = header(report)
    config = h.pop("config")
    for k, v in h.items():
        buf.write(f"# {k}: {_fmt(v)}\n")
    for k, v in config.items():
        buf.write(f"# config.{k} = {json.dumps(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for r in report.records:
        w.writerow([_fmt(v) for v in r])
    for name, rows in report.tables.items():
        for row in rows:
            buf.write(f"# table {name}: " + ", ".join(f"{k}={_fmt(v)}" for k, v in row.items()) + "\n")
    for v in report.verdicts:
        buf.write("# verdict: " + ", ".join(f"{k}={_fmt(x)}" for k, x in v.items()) + "\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render_json(report: Report) -> str:
    doc = {
        "header": header(report),
        "records": [dict(zip(report.columns, r)) for r in report.records],
        "tables": report.tables,
        "verdicts": report.verdicts,
    }
    return json.dumps(_jsonable(doc), indent=1) + "\n"


def write_report(report: Report) -> None:
    text = render_json(report) if report.config.format == "json" else render_csv(report)
    if report.config.out is None:
        sys.stdout.write(text)
        return
    try:
        with open(report.config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {report.config.out}: {exc.strerror}") from exc


def summarize(report: Report, elapsed: float) -> str:
    lines = [f"{report.experiment}: {report.config.samples} samples in {elapsed:.1f}s"]
    for v in report.verdicts:
        status = "PASS" if v.get("pass", True) else "FAIL"
        keys = [k for k in v if k != "name" and not k.startswith("pass") and v[k] is not None]
        lines.append(f"  [{status}] {v['name']}: " + ", ".join(f"{k}={_fmt(v[k])}" for k in keys))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--seed", type=str, help="64-bit master seed")
    common.add_argument("--samples", type=str, help="number of Monte-Carlo samples")
    common.add_argument("--T", dest="T", type=str, help="ergodic horizon")
    common.add_argument("--t", dest="t_values", action="append", help="dilation (repeatable, comma lists allowed)")
    common.add_argument("--epsilon", type=str)
    common.add_argument("--a", type=str, help="half-side of the square")
    common.add_argument("--theta", type=str, help="rademacher or uniform:<a>")
    common.add_argument("--beta", type=str, help="t +- beta*tau shift")
    common.add_argument("--m-max", dest="m_max", type=str, help="Fourier truncation")
    common.add_argument("--workers", type=str, help="worker processes (fallback: CAUCHYLAT_WORKERS)")
    common.add_argument("--out", type=str, help="output path (default: stdout)")
    common.add_argument("--format", type=str, choices=("csv", "json"))
    common.add_argument("--gaps", type=str, help="pair-correlation gaps, e.g. 1,2,5,10")
    common.add_argument("--pair-x", dest="pair_x", type=str, help="pair-correlation threshold b/T")
    common.add_argument("--lattice", type=str, choices=("haar", "identity"))
    common.add_argument("--X", dest="X", type=str, help="fixed translation 'x1,x2' (default: uniform)")
    common.add_argument("--sigma", dest="sigma", action="store_const", const=True, help="compute Fourier-sum columns")
    common.add_argument("--no-sigma", dest="sigma", action="store_const", const=False)
    parser = argparse.ArgumentParser(prog="cauchylat", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"cauchylat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=ANCHORS[name])
    sub.add_parser("selftest", help="oracle-equivalence suites")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_all

        ok = True
        for r in run_all():
            print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
            ok &= r.passed
        return 0 if ok else 1
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, flags)
        t0 = time.perf_counter()
        report = RUNNERS[args.command](cfg)
        write_report(report)
    except CauchylatError as exc:
        print(f"cauchylat: error: {exc}", file=sys.stderr)
        return 2
    print(summarize(report, time.perf_counter() - t0), file=sys.stderr)
    return 0 if report.passed() else 1


if __name__ == "__main__":
    sys.exit(main())
