"""Greedy pursuit solvers: OMP, generalized OMP and James-Stein gOMP.

All three share one loop: identify the N atoms most correlated with the
current residual, add them to the support, re-fit by least squares on the
support, update the residual. JS-gOMP runs the loop on the mean of a
measurement ensemble and shrinks the correlation vector before selection,
with the shrinkage strength taken from the ensemble's sample variance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from .linalg import RankDeficient, lstsq, select_columns, transpose_matvec
from .problems import MeasurementEnsemble, SensingMatrix


class ConfigError(ValueError):
    pass


class VarianceMode(str, enum.Enum):
    SCALAR_MEAN = "scalar_mean"
    PER_ATOM_QUADRATIC = "per_atom_quadratic"


class HaltNorm(str, enum.Enum):
    MEAN = "mean"  # l2 norm of the ensemble-mean residual
    FROBENIUS = "frobenius"  # ||R||_F / sqrt(p)


class HaltReason(str, enum.Enum):
    RESIDUAL_BELOW_TOL = "ResidualBelowTol"
    ITERATION_CAP = "IterationCap"
    RANK_DEFICIENT = "RankDeficient"


@dataclass(frozen=True)
class PursuitConfig:
    N: int
    K: int
    halt_tol: Optional[float] = None  # None -> 1e-6 * ||y||
    max_iter_override: Optional[int] = None
    js_variance_mode: VarianceMode = VarianceMode.PER_ATOM_QUADRATIC
    js_positive_part: bool = False
    select_raw: bool = False
    halt_norm: HaltNorm = HaltNorm.MEAN

    def validate(self, m: int) -> None:
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.halt_tol is not None and self.halt_tol < 0:
            raise ConfigError(f"halt_tol must be >= 0, got {self.halt_tol}")
        if self.max_iter_override is not None and self.max_iter_override < 1:
            raise ConfigError(f"max_iter_override must be >= 1, got {self.max_iter_override}")
        # N <= min{K, m/K}, compared in integers
        if self.N > self.K or self.N * self.K > m:
            raise ConfigError(
                f"N={self.N} violates N <= min(K, m/K) for K={self.K}, m={m}"
            )

    def iteration_cap(self, m: int) -> int:
        if self.max_iter_override is not None:
            return self.max_iter_override
        # largest count of iterations with k < min(K, m/N)
        return min(self.K, -(-m // self.N))


@dataclass
class PursuitResult:
    support: np.ndarray
    x_hat: np.ndarray
    residual_norm_trace: list[float]
    iterations: int
    halt_reason: HaltReason
    selection_order: list[int] = field(default_factory=list)


def correlate(phi: SensingMatrix, v: np.ndarray) -> np.ndarray:
    return transpose_matvec(phi.matrix, v)


def correlation_variance(
    phi: SensingMatrix,
    sigma2_res: np.ndarray,
    mode: VarianceMode = VarianceMode.PER_ATOM_QUADRATIC,
    phi_sq: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Variance of each atom's correlation with noise of per-component variance ``sigma2_res``."""
    mode = VarianceMode(mode)
    if mode is VarianceMode.SCALAR_MEAN:
        return float(np.mean(sigma2_res)) * phi.col_norms**2
    if phi_sq is None:
        phi_sq = phi.matrix**2
    return phi_sq.T @ sigma2_res


def js_shrink(
    cr: np.ndarray,
    sigma2_res: np.ndarray,
    phi: SensingMatrix,
    p: int,
    mode: VarianceMode = VarianceMode.PER_ATOM_QUADRATIC,
    positive_part: bool = False,
    phi_sq: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, bool]:
    """James-Stein shrinkage of a correlation vector.

    Returns ``(shrunk, degenerate)``. ``degenerate`` is True when ``cr`` is
    the zero vector, in which case it is returned unchanged.
    """
    if p < 3:
        raise ConfigError(f"James-Stein shrinkage needs an ensemble of p >= 3, got p={p}")
    norm2 = float(cr @ cr)
    if norm2 == 0.0:
        return cr.copy(), True
    s = correlation_variance(phi, sigma2_res, mode, phi_sq)
    factor = 1.0 - (p - 2) * s / norm2
    if positive_part:
        factor = np.maximum(factor, 0.0)
    return factor * cr, False


def identify_top_n(cr: np.ndarray, N: int, exclude: Iterable[int] = ()) -> list[int]:
    """Indices of the N largest |cr|, skipping ``exclude``; ties go to the lower index."""
    mag = np.abs(cr)
    exclude = list(exclude)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if cr.size - len(set(exclude)) < N:
        raise ValueError(f"only {cr.size - len(set(exclude))} candidates left, need {N}")
    if exclude:
        mag = mag.copy()
        mag[exclude] = -np.inf
    order = np.argsort(-mag, kind="stable")
    return [int(i) for i in order[:N]]


def _pursue(
    phi: SensingMatrix,
    Y: np.ndarray,
    cfg: PursuitConfig,
    shrink: bool,
) -> PursuitResult:
    m, n = phi.shape
    p = Y.shape[1]
    A = phi.matrix
    y_bar = Y.mean(axis=1)
    halt_tol = cfg.halt_tol if cfg.halt_tol is not None else 1e-6 * float(np.linalg.norm(y_bar))
    cap = cfg.iteration_cap(m)
    mode = VarianceMode(cfg.js_variance_mode)
    phi_sq = A**2 if shrink and mode is VarianceMode.PER_ATOM_QUADRATIC else None

    def halt_value(R: np.ndarray, mu: np.ndarray) -> float:
        if cfg.halt_norm == HaltNorm.FROBENIUS:
            return float(np.linalg.norm(R)) / math.sqrt(p)
        return float(np.linalg.norm(mu))

    R = Y
    mu = y_bar
    sigma2 = Y.var(axis=1, ddof=1) if shrink else None
    selected: list[int] = []
    coef = np.zeros(0)
    trace: list[float] = []
    k = 0
    reason = HaltReason.ITERATION_CAP
    while True:
        h = halt_value(R, mu)
        trace.append(h)
        if h <= halt_tol:
            reason = HaltReason.RESIDUAL_BELOW_TOL
            break
        if k >= cap or len(selected) + cfg.N > min(n, m):
            reason = HaltReason.ITERATION_CAP
            break
        cr = correlate(phi, mu)
        score = cr
        if shrink and not cfg.select_raw:
            score, _ = js_shrink(cr, sigma2, phi, p, mode, cfg.js_positive_part, phi_sq)
        new = identify_top_n(score, cfg.N, selected)
        candidate = selected + new
        try:
            u = lstsq(select_columns(A, candidate), y_bar)
        except RankDeficient:
            reason = HaltReason.RANK_DEFICIENT
            break
        selected = candidate
        coef = u
        fit = A[:, selected] @ coef
        R = Y - fit[:, None]
        mu = R.mean(axis=1)
        if shrink:
            sigma2 = R.var(axis=1, ddof=1)
        k += 1

    if shrink and selected and reason is not HaltReason.RANK_DEFICIENT:
        # closing re-fit on the final support
        coef = lstsq(select_columns(A, selected), y_bar)

    x_hat = np.zeros(n)
    if selected:
        x_hat[selected] = coef
    return PursuitResult(
        support=np.array(sorted(selected), dtype=np.int64),
        x_hat=x_hat,
        residual_norm_trace=trace,
        iterations=k,
        halt_reason=reason,
        selection_order=list(selected),
    )


def gomp(phi: SensingMatrix, y: np.ndarray, cfg: PursuitConfig) -> PursuitResult:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != phi.m:
        raise ValueError(f"measurement length {y.shape} does not match {phi.m} rows")
    cfg.validate(phi.m)
    return _pursue(phi, y[:, None], cfg, shrink=False)


def omp(phi: SensingMatrix, y: np.ndarray, cfg: PursuitConfig) -> PursuitResult:
    return gomp(phi, y, replace(cfg, N=1))


def js_gomp(phi: SensingMatrix, ens: MeasurementEnsemble, cfg: PursuitConfig) -> PursuitResult:
    Y = np.asarray(ens.Y if isinstance(ens, MeasurementEnsemble) else ens, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != phi.m:
        raise ValueError(f"ensemble shape {Y.shape} does not match {phi.m} rows")
    if Y.shape[1] < 3:
        raise ConfigError(f"JS-gOMP needs an ensemble of p >= 3, got p={Y.shape[1]}")
    cfg.validate(phi.m)
    return _pursue(phi, Y, cfg, shrink=True)
