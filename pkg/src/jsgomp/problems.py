"""Random test instances: Gaussian dictionaries, K-sparse signals, noisy ensembles.

Every generator takes an explicit ``numpy.random.Generator``; nothing touches
global RNG state. A whole instance is a pure function of its parameters and
a 64-bit seed, so it can be regenerated from a small JSON document.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, matvec


@dataclass(frozen=True)
class SensingMatrix:
    matrix: np.ndarray
    col_norms: np.ndarray

    @classmethod
    def from_array(cls, a) -> "SensingMatrix":
        a = as_matrix(a)
        return cls(a, np.linalg.norm(a, axis=0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class SparseSignal:
    n: int
    support: np.ndarray  # sorted int indices
    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support)
        if s.size > self.n:
            raise ValueError("support larger than ambient dimension")
        if s.size and (s[0] < 0 or s[-1] >= self.n or np.any(np.diff(s) <= 0)):
            raise ValueError("support must be strictly increasing within [0, n)")
        if len(self.values) != s.size:
            raise ValueError("support and values differ in length")

    @property
    def K(self) -> int:
        return int(len(self.support))

    def dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.support] = self.values
        return x

    @classmethod
    def from_dense(cls, x) -> "SparseSignal":
        x = np.asarray(x, dtype=np.float64)
        support = np.flatnonzero(x)
        return cls(x.size, support, x[support].copy())


@dataclass(frozen=True)
class MeasurementEnsemble:
    y0: np.ndarray
    Y: np.ndarray  # (m, p), one noisy copy of y0 per column
    sigma2: float
    snr_db: float

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    def mean(self) -> np.ndarray:
        return self.Y.mean(axis=1)


@dataclass(frozen=True)
class ProblemInstance:
    phi: SensingMatrix
    x: SparseSignal
    ens: MeasurementEnsemble
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.phi.m,
                "n": self.phi.n,
                "K": self.x.K,
                "p": self.ens.p,
                "snr_db": _encode_snr(self.ens.snr_db),
                "seed": int(self.seed),
                "support": [int(i) for i in self.x.support],
                "values": [float(v) for v in self.x.values],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        d = json.loads(text)
        inst = make_instance(d["m"], d["n"], d["K"], d["p"], _decode_snr(d["snr_db"]), d["seed"])
        if list(inst.x.support) != d["support"] or list(inst.x.values) != d["values"]:
            raise ValueError("instance document does not match its seed")
        return inst


def _encode_snr(snr_db: float):
    return "inf" if math.isinf(snr_db) else float(snr_db)


def _decode_snr(v) -> float:
    return float(v)


def gen_sensing_matrix(m: int, n: int, rng: np.random.Generator) -> SensingMatrix:
    """Entries i.i.d. N(0, 1/m), so columns have unit expected squared norm."""
    if m < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got {m}x{n}")
    a = rng.standard_normal((m, n)) / math.sqrt(m)
    return SensingMatrix.from_array(a)


def gen_sparse_signal(n: int, K: int, rng: np.random.Generator) -> SparseSignal:
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")
    support = np.sort(rng.choice(n, size=K, replace=False))
    values = rng.standard_normal(K)
    while np.any(values == 0.0):
        zero = values == 0.0
        values[zero] = rng.standard_normal(int(zero.sum()))
    return SparseSignal(n, support, values)


def noise_variance(y0: np.ndarray, snr_db: float) -> float:
    """Per-component noise variance giving ``snr_db`` relative to ``||y0||^2 / m``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(y0 @ y0) / (y0.size * 10.0 ** (snr_db / 10.0))


def gen_ensemble(
    phi: SensingMatrix, x: SparseSignal, snr_db: float, p: int, rng: np.random.Generator
) -> MeasurementEnsemble:
    if p < 1:
        raise ValueError(f"ensemble size must be >= 1, got {p}")
    if phi.n != x.n:
        raise ValueError(f"dictionary has {phi.n} atoms, signal has dimension {x.n}")
    y0 = matvec(phi.matrix, x.dense())
    if not np.any(y0):
        raise ValueError("clean measurement is identically zero; SNR is undefined")
    sigma2 = noise_variance(y0, snr_db)
    z = rng.standard_normal((phi.m, p))
    Y = y0[:, None] + math.sqrt(sigma2) * z
    return MeasurementEnsemble(y0, np.asfortranarray(Y), sigma2, float(snr_db))


def snr_from_linear(ratio: float) -> float:
    if ratio <= 0:
        raise ValueError("linear SNR must be positive")
    return 10.0 * math.log10(ratio)


def child_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 64-bit seed for one work item, independent of execution order."""
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_instance(m: int, n: int, K: int, p: int, snr_db: float, seed: int) -> ProblemInstance:
    """Draw dictionary, signal and ensemble, in that order, from one seeded stream."""
    rng = np.random.default_rng(seed)
    phi = gen_sensing_matrix(m, n, rng)
    x = gen_sparse_signal(n, K, rng)
    ens = gen_ensemble(phi, x, snr_db, p, rng)
    return ProblemInstance(phi, x, ens, int(seed))
