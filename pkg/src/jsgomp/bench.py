"""Monte-Carlo experiment runner: sparsity sweeps, SNR sweeps, error traces, RIC probes.

Each (K, trial) pair maps to one child seed, so every algorithm at a grid
point sees the same instance and results never depend on worker count or
scheduling. Raw rows are sorted by grid position and trial index before
they are aggregated or written.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import (
    RicMethod,
    check_gomp_condition,
    estimate_ric,
    score_trial,
)
from .problems import SensingMatrix, child_seed, make_instance
from .pursuit import ConfigError, HaltNorm, PursuitConfig, VarianceMode, gomp, js_gomp, omp

log = logging.getLogger(__name__)

ALGORITHMS = ("omp", "gomp", "js_gomp")
TIMING_FIELDS = ("runtime_seconds", "mean_runtime")


@dataclass
class ExperimentConfig:
    m: int = 50
    n: int = 500
    algorithms: dict[str, list[int]] = field(
        default_factory=lambda: {"omp": [1], "gomp": [2], "js_gomp": [2]}
    )
    K_grid: list[int] = field(default_factory=lambda: [5, 10, 15, 20, 25, 30, 35, 40])
    snr_db: list[float] = field(default_factory=lambda: [4.0])
    p: int = 5
    trials: int = 500
    master_seed: int = 0
    recovery_tol: Optional[float] = None  # None -> 1e-4 noiseless, 10^(-snr/20) noisy
    js_mode: VarianceMode = VarianceMode.PER_ATOM_QUADRATIC
    js_positive_part: bool = False
    select_raw: bool = False
    halt_norm: HaltNorm = HaltNorm.MEAN
    baseline_single_column: bool = False
    timing: bool = True
    jobs: int = 1

    def validate(self) -> None:
        def bad(name: str, msg: str):
            raise ConfigError(f"field '{name}': {msg}")

        if self.m < 1:
            bad("m", f"must be >= 1, got {self.m}")
        if self.n < 1:
            bad("n", f"must be >= 1, got {self.n}")
        if not self.algorithms:
            bad("algorithms", "must name at least one algorithm")
        for name, Ns in self.algorithms.items():
            if name not in ALGORITHMS:
                bad("algorithms", f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
            if not Ns or any(int(N) < 1 for N in Ns):
                bad("algorithms", f"{name} needs a non-empty list of N >= 1, got {Ns}")
            if name == "omp" and any(int(N) != 1 for N in Ns):
                bad("algorithms", f"omp selects one atom per iteration, got N={Ns}")
        if not self.K_grid:
            bad("K_grid", "must be non-empty")
        if any(not 1 <= K <= self.n for K in self.K_grid):
            bad("K_grid", f"entries must lie in [1, n={self.n}], got {self.K_grid}")
        if not self.snr_db:
            bad("snr_db", "must be non-empty")
        if any(math.isnan(s) for s in self.snr_db):
            bad("snr_db", "NaN is not a valid SNR")
        if self.p < 1:
            bad("p", f"must be >= 1, got {self.p}")
        if "js_gomp" in self.algorithms and self.p < 3:
            bad("p", f"js_gomp needs p >= 3, got {self.p}")
        if self.trials < 1:
            bad("trials", f"must be >= 1, got {self.trials}")
        if not 0 <= self.master_seed < 2**64:
            bad("master_seed", f"must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.recovery_tol is not None and self.recovery_tol < 0:
            bad("recovery_tol", f"must be >= 0, got {self.recovery_tol}")
        if self.jobs < 1:
            bad("jobs", f"must be >= 1, got {self.jobs}")
        VarianceMode(self.js_mode)
        HaltNorm(self.halt_norm)

    def tolerance(self, snr_db: float) -> float:
        if self.recovery_tol is not None:
            return self.recovery_tol
        if math.isinf(snr_db) and snr_db > 0:
            return 1e-4
        return 10.0 ** (-snr_db / 20.0)

    def pursuit_config(self, N: int, K: int) -> PursuitConfig:
        return PursuitConfig(
            N=N,
            K=K,
            js_variance_mode=VarianceMode(self.js_mode),
            js_positive_part=self.js_positive_part,
            select_raw=self.select_raw,
            halt_norm=HaltNorm(self.halt_norm),
        )

    def runs(self, K: int, warn: bool = False) -> list[tuple[str, int]]:
        """(algorithm, N) pairs admissible at sparsity K; the rest are skipped with a warning."""
        out = []
        for name in ALGORITHMS:
            for N in self.algorithms.get(name, []):
                try:
                    self.pursuit_config(int(N), K).validate(self.m)
                except ConfigError as exc:
                    if warn:
                        log.warning("skipping %s N=%d at K=%d: %s", name, N, K, exc)
                    continue
                out.append((name, int(N)))
        return out

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["js_mode"] = VarianceMode(self.js_mode).value
        d["halt_norm"] = HaltNorm(self.halt_norm).value
        d["snr_db"] = [_enc_float(s) for s in self.snr_db]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        d = dict(d)
        try:
            if "snr_db" in d:
                snr = d["snr_db"]
                d["snr_db"] = [float(s) for s in (snr if isinstance(snr, list) else [snr])]
            if "K_grid" in d:
                d["K_grid"] = [int(K) for K in d["K_grid"]]
            if "algorithms" in d:
                if not isinstance(d["algorithms"], dict):
                    raise ConfigError("field 'algorithms': must map algorithm name to a list of N")
                d["algorithms"] = {k: [int(N) for N in v] for k, v in d["algorithms"].items()}
            if "js_mode" in d:
                d["js_mode"] = VarianceMode(_js_mode_alias(d["js_mode"]))
            if "halt_norm" in d:
                d["halt_norm"] = HaltNorm(d["halt_norm"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg = cls(**d)
        cfg.validate()
        return cfg


def _js_mode_alias(v: str) -> str:
    return {"scalar": "scalar_mean", "quadratic": "per_atom_quadratic"}.get(v, v)


def _enc_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "m": {"type": "integer", "minimum": 1, "default": 50},
        "n": {"type": "integer", "minimum": 1, "default": 500},
        "algorithms": {
            "type": "object",
            "description": "algorithm name -> list of atoms-per-iteration N",
            "propertyNames": {"enum": list(ALGORITHMS)},
            "additionalProperties": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "default": {"omp": [1], "gomp": [2], "js_gomp": [2]},
        },
        "K_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "snr_db": {
            "description": "SNR in dB, a number or a list; \"inf\" means noiseless",
            "oneOf": [
                {"type": ["number", "string"]},
                {"type": "array", "items": {"type": ["number", "string"]}, "minItems": 1},
            ],
        },
        "p": {"type": "integer", "minimum": 1, "default": 5},
        "trials": {"type": "integer", "minimum": 1, "default": 500},
        "master_seed": {"type": "integer", "minimum": 0, "default": 0},
        "recovery_tol": {"type": ["number", "null"], "minimum": 0, "default": None},
        "js_mode": {"enum": ["scalar_mean", "per_atom_quadratic", "scalar", "quadratic"]},
        "js_positive_part": {"type": "boolean", "default": False},
        "select_raw": {"type": "boolean", "default": False},
        "halt_norm": {"enum": ["mean", "frobenius"], "default": "mean"},
        "baseline_single_column": {"type": "boolean", "default": False},
        "timing": {"type": "boolean", "default": True},
        "jobs": {"type": "integer", "minimum": 1, "default": 1},
    },
}


@dataclass(frozen=True)
class TrialRecord:
    algorithm: str
    N: int
    K: int
    snr_db: float
    trial: int
    seed: int
    exact_recovery: bool
    support_recall: float
    relative_l2_error: float
    rms_error: float
    psnr_db: float
    atom_count: int
    iterations: int
    halt_reason: str
    runtime_seconds: float


RAW_FIELDS = [f.name for f in dataclasses.fields(TrialRecord)]
AGG_FIELDS = [
    "algorithm", "N", "K", "snr_db", "trial_count",
    "success_frequency", "success_stderr",
    "mean_relative_error", "rms_error",
    "mean_psnr", "psnr_stderr",
    "mean_atom_count", "atom_count_stderr",
    "mean_runtime",
]


@dataclass
class ResultTable:
    raw: list[TrialRecord]
    aggregate: list[dict]

    @classmethod
    def from_raw(cls, raw: Sequence[TrialRecord]) -> "ResultTable":
        return cls(list(raw), aggregate(raw))

    def select(self, algorithm: str, N: Optional[int] = None) -> list[dict]:
        return [
            row for row in self.aggregate
            if row["algorithm"] == algorithm and (N is None or row["N"] == N)
        ]

    def write(self, out: Path | str, fmt: str = "csv") -> tuple[Path, Path]:
        out = Path(out)
        raw_path = out.with_name(f"{out.name}_raw.{fmt}")
        agg_path = out.with_name(f"{out.name}_aggregate.{fmt}")
        raw_rows = [dataclasses.asdict(r) for r in self.raw]
        for path, fields, rows in ((raw_path, RAW_FIELDS, raw_rows), (agg_path, AGG_FIELDS, self.aggregate)):
            write_rows(path, fields, rows, fmt)
        return raw_path, agg_path


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    mean = float(a.mean())
    if a.size < 2 or not np.all(np.isfinite(a)):
        return mean, math.nan if a.size >= 2 else 0.0
    return mean, float(a.std(ddof=1) / math.sqrt(a.size))


def aggregate(raw: Iterable[TrialRecord]) -> list[dict]:
    """Fold raw trial rows into one row per (algorithm, N, K, snr_db), in first-seen order."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in raw:
        groups.setdefault((r.algorithm, r.N, r.K, r.snr_db), []).append(r)
    rows = []
    for (alg, N, K, snr), rs in groups.items():
        succ, succ_se = _mean_se([float(r.exact_recovery) for r in rs])
        psnr_mean, psnr_se = _mean_se([r.psnr_db for r in rs])
        atoms, atoms_se = _mean_se([r.atom_count for r in rs])
        rows.append({
            "algorithm": alg,
            "N": N,
            "K": K,
            "snr_db": snr,
            "trial_count": len(rs),
            "success_frequency": succ,
            "success_stderr": succ_se,
            "mean_relative_error": float(np.mean([r.relative_l2_error for r in rs])),
            "rms_error": math.sqrt(float(np.mean([r.rms_error**2 for r in rs]))),
            "mean_psnr": psnr_mean,
            "psnr_stderr": psnr_se,
            "mean_atom_count": atoms,
            "atom_count_stderr": atoms_se,
            "mean_runtime": float(np.mean([r.runtime_seconds for r in rs])),
        })
    return rows


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return _fmt(v)
    return v


def write_rows(path: Path, fields: Sequence[str], rows: Sequence[dict], fmt: str = "csv") -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[f]) for f in fields])
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif fmt == "json":
        doc = [{f: _json_value(row[f]) for f in fields} for row in rows]
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    else:
        raise ConfigError(f"field 'format': unknown output format {fmt!r}")


SOLVERS = {"omp": omp, "gomp": gomp}


def run_trial(cfg: ExperimentConfig, K: int, snr_db: float, trial: int) -> list[TrialRecord]:
    """All configured algorithms on the single instance for (K, trial) at ``snr_db``."""
    seed = child_seed(cfg.master_seed, K, trial)
    inst = make_instance(cfg.m, cfg.n, K, cfg.p, snr_db, seed)
    y = inst.ens.Y[:, 0] if cfg.baseline_single_column else inst.ens.mean()
    tol = cfg.tolerance(snr_db)
    records = []
    for name, N in cfg.runs(K):
        pcfg = cfg.pursuit_config(N, K)
        t0 = time.perf_counter()
        if name == "js_gomp":
            res = js_gomp(inst.phi, inst.ens, pcfg)
        else:
            res = SOLVERS[name](inst.phi, y, pcfg)
        elapsed = time.perf_counter() - t0 if cfg.timing else 0.0
        met = score_trial(inst.x, res, tol, runtime_seconds=elapsed)
        records.append(TrialRecord(
            algorithm=name, N=N, K=K, snr_db=float(snr_db), trial=trial, seed=seed,
            exact_recovery=met.exact_recovery,
            support_recall=met.support_recall,
            relative_l2_error=met.relative_l2_error,
            rms_error=met.rms_error,
            psnr_db=met.psnr_db,
            atom_count=met.atom_count,
            iterations=res.iterations,
            halt_reason=res.halt_reason.value,
            runtime_seconds=elapsed,
        ))
    return records


def _run_block(args) -> list[TrialRecord]:
    cfg, K, snr, trials = args
    out = []
    for t in trials:
        out.extend(run_trial(cfg, K, snr, t))
    return out


def _run_grid(cfg: ExperimentConfig, points: list[tuple[int, float]], progress=None) -> ResultTable:
    cfg.validate()
    for K in dict.fromkeys(K for K, _ in points):
        cfg.runs(K, warn=True)
    block = max(1, min(50, cfg.trials))
    work = [
        (cfg, K, snr, range(start, min(start + block, cfg.trials)))
        for K, snr in points
        for start in range(0, cfg.trials, block)
    ]
    raw: list[TrialRecord] = []
    if cfg.jobs == 1:
        results = map(_run_block, work)
        for i, rs in enumerate(results):
            raw.extend(rs)
            if progress:
                progress(i + 1, len(work))
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for i, rs in enumerate(pool.map(_run_block, work)):
                raw.extend(rs)
                if progress:
                    progress(i + 1, len(work))
    order = {pt: i for i, pt in enumerate(points)}
    alg_order = {a: i for i, a in enumerate(ALGORITHMS)}
    raw.sort(key=lambda r: (order[(r.K, r.snr_db)], r.trial, alg_order[r.algorithm], r.N))
    return ResultTable.from_raw(raw)


def run_sparsity_sweep(cfg: ExperimentConfig, progress=None) -> ResultTable:
    """Recovery statistics over ``K_grid`` at each configured SNR."""
    points = [(K, float(s)) for s in cfg.snr_db for K in cfg.K_grid]
    return _run_grid(cfg, points, progress)


def run_snr_sweep(cfg: ExperimentConfig, progress=None) -> ResultTable:
    """Recovery statistics over the SNR grid at each configured K (usually one)."""
    points = [(K, float(s)) for K in cfg.K_grid for s in cfg.snr_db]
    return _run_grid(cfg, points, progress)


TRACE_COLUMNS = {"omp": "x_recon_omp", "gomp": "x_recon_gomp", "js_gomp": "x_recon_jsgomp"}


def error_trace_table(cfg: ExperimentConfig, trial_seed: int) -> tuple[list[str], list[list[float]]]:
    """Ground truth and each algorithm's reconstruction for one instance."""
    cfg.validate()
    K = cfg.K_grid[0]
    snr = float(cfg.snr_db[0])
    inst = make_instance(cfg.m, cfg.n, K, cfg.p, snr, trial_seed)
    y = inst.ens.Y[:, 0] if cfg.baseline_single_column else inst.ens.mean()
    cols = ["index", "x_actual"]
    data = [np.arange(cfg.n, dtype=np.float64), inst.x.dense()]
    for name in ALGORITHMS:
        if name not in cfg.algorithms:
            continue
        N = int(cfg.algorithms[name][0])
        pcfg = cfg.pursuit_config(N, K)
        pcfg.validate(cfg.m)
        if name == "js_gomp":
            res = js_gomp(inst.phi, inst.ens, pcfg)
        else:
            res = SOLVERS[name](inst.phi, y, pcfg)
        cols.append(TRACE_COLUMNS[name])
        data.append(res.x_hat)
    rows = [[int(i)] + [float(c[i]) for c in data[1:]] for i in range(cfg.n)]
    return cols, rows


def dump_error_trace(cfg: ExperimentConfig, trial_seed: int, out: Path | str, fmt: str = "csv") -> Path:
    cols, rows = error_trace_table(cfg, trial_seed)
    path = Path(out)
    path = path.with_name(f"{path.name}_trace.{fmt}")
    write_rows(path, cols, [dict(zip(cols, r)) for r in rows], fmt)
    return path


def probe_ric_rows(
    phi: SensingMatrix,
    K_max: int,
    method: RicMethod = RicMethod.EXHAUSTIVE,
    budget: Optional[int] = None,
    seed: int = 0,
    N_list: Sequence[int] = (1, 2),
) -> tuple[list[str], list[dict]]:
    """delta_K for K = 1..K_max and, per N, whether delta_{K+N} meets the gOMP condition.

    A verdict is left empty when order K+N was not estimated (beyond K_max or n).
    """
    rng = np.random.default_rng(seed)
    top = min(phi.n, K_max + max(N_list))
    deltas = {}
    for order in range(1, top + 1):
        if order > K_max and RicMethod(method) is RicMethod.EXHAUSTIVE and math.comb(phi.n, order) > 10**6:
            break
        deltas[order] = estimate_ric(phi, order, method, budget, rng)
    fields = ["K", "delta_lower", "method", "supports_checked"] + [f"cond_N{N}" for N in N_list]
    rows = []
    for K in range(1, min(K_max, phi.n) + 1):
        est = deltas[K]
        row = {
            "K": K,
            "delta_lower": est.delta_lower,
            "method": est.method.value,
            "supports_checked": est.supports_checked,
        }
        for N in N_list:
            d = deltas.get(K + N)
            row[f"cond_N{N}"] = "" if d is None else check_gomp_condition(d.delta_lower, K, N)
        rows.append(row)
    return fields, rows


def probe_ric(
    m: int, n: int, K_max: int, method: RicMethod, budget: Optional[int], seed: int,
    out: Path | str, N_list: Sequence[int] = (1, 2), fmt: str = "csv",
) -> Path:
    from .problems import gen_sensing_matrix

    phi = gen_sensing_matrix(m, n, np.random.default_rng(seed))
    fields, rows = probe_ric_rows(phi, K_max, method, budget, seed, N_list)
    path = Path(out)
    path = path.with_name(f"{path.name}_ric.{fmt}")
    write_rows(path, fields, rows, fmt)
    return path


def strip_timing(text: str) -> str:
    """Drop runtime columns from CSV text, for byte comparisons across runs."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return text
    keep = [i for i, f in enumerate(rows[0]) if f not in TIMING_FIELDS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([row[i] for i in keep])
    return buf.getvalue()


def critical_sparsity(rows: Sequence[dict], level: float = 0.99) -> int:
    """Largest K whose success frequency is at least ``level`` (0 if none)."""
    ok = [row["K"] for row in rows if row["success_frequency"] >= level]
    return max(ok, default=0)


def paired_difference(
    raw: Sequence[TrialRecord],
    a: tuple[str, int],
    b: tuple[str, int],
    metric: str,
    K: int,
    snr_db: float,
) -> tuple[float, float, int]:
    """Mean and standard error of ``metric(a) - metric(b)`` over trials shared by both runs."""

    def values(alg):
        return {
            r.trial: float(getattr(r, metric))
            for r in raw
            if (r.algorithm, r.N) == alg and r.K == K and r.snr_db == snr_db
        }

    va, vb = values(a), values(b)
    common = sorted(set(va) & set(vb))
    if not common:
        return math.nan, math.nan, 0
    d = np.array([va[t] - vb[t] for t in common])
    se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
    return float(d.mean()), se, d.size
