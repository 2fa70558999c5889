"""Ground-truth oracles and per-trial metrics.

Brute-force l0 recovery, restricted isometry constants by support
enumeration, the gOMP recovery-condition check, a Monte-Carlo check of the
correlation noise statistics, and the scoring used by the benchmark.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import RankDeficient, lstsq, select_columns
from .problems import SensingMatrix, SparseSignal
from .pursuit import PursuitResult

ENUMERATION_LIMIT = 10**6


class RicMethod(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOM_SUPPORTS = "random"


@dataclass(frozen=True)
class RicEstimate:
    K: int
    delta_lower: float
    method: RicMethod
    supports_checked: int


@dataclass(frozen=True)
class TrialMetrics:
    exact_recovery: bool
    support_recall: float
    relative_l2_error: float
    psnr_db: float
    atom_count: int
    rms_error: float
    runtime_seconds: float = 0.0


def _guard_enumeration(n: int, K: int) -> int:
    count = math.comb(n, K)
    if count > ENUMERATION_LIMIT:
        raise ValueError(
            f"C({n},{K}) = {count} supports exceeds the enumeration limit "
            f"{ENUMERATION_LIMIT}; use a smaller instance or random supports"
        )
    return count


def l0_oracle(phi: SensingMatrix, y: np.ndarray, K: int) -> SparseSignal:
    """Best K-term least-squares fit over all K-subsets of atoms.

    Ties keep the lexicographically smallest support. Rank-deficient subsets
    are skipped; their fit is matched by some smaller, non-degenerate subset.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    _guard_enumeration(phi.n, K)
    A = phi.matrix
    best_res = math.inf
    best: Optional[tuple[tuple[int, ...], np.ndarray]] = None
    for S in itertools.combinations(range(phi.n), K):
        sub = select_columns(A, S)
        try:
            u = lstsq(sub, y)
        except RankDeficient:
            continue
        res = float(np.linalg.norm(y - sub @ u))
        if res < best_res:
            best_res = res
            best = (S, u)
    if best is None:
        raise RankDeficient(0, 0.0)
    S, u = best
    return SparseSignal(phi.n, np.array(S, dtype=np.int64), np.asarray(u, dtype=np.float64))


def _gram_deviation(A: np.ndarray, supports: np.ndarray) -> np.ndarray:
    """max(lambda_max - 1, 1 - lambda_min) of each support's Gram matrix."""
    sub = A[:, supports]  # (m, B, K)
    gram = np.einsum("mbi,mbj->bij", sub, sub)
    lam = np.linalg.eigvalsh(gram)
    return np.maximum(lam[:, -1] - 1.0, 1.0 - lam[:, 0])


def estimate_ric(
    phi: SensingMatrix,
    K: int,
    method: RicMethod = RicMethod.EXHAUSTIVE,
    budget: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    chunk: int = 20000,
) -> RicEstimate:
    method = RicMethod(method)
    if not 1 <= K <= phi.n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={phi.n}")
    if budget is not None and budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    A = phi.matrix
    delta = 0.0
    checked = 0
    if method is RicMethod.EXHAUSTIVE:
        _guard_enumeration(phi.n, K)
        combos = itertools.combinations(range(phi.n), K)
        while True:
            block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            delta = max(delta, float(_gram_deviation(A, block).max()))
            checked += len(block)
    else:
        if budget is None:
            raise ValueError("random-support estimation needs a budget")
        if rng is None:
            raise ValueError("random-support estimation needs a seeded generator")
        for start in range(0, budget, chunk):
            b = min(chunk, budget - start)
            block = np.sort(
                np.stack([rng.choice(phi.n, size=K, replace=False) for _ in range(b)]), axis=1
            )
            delta = max(delta, float(_gram_deviation(A, block).max()))
            checked += b
    return RicEstimate(K, max(delta, 0.0), method, checked)


def gomp_condition_threshold(K: int, N: int) -> float:
    return math.sqrt(N) / (math.sqrt(K) + math.sqrt(N))


def check_gomp_condition(delta: float, K: int, N: int) -> bool:
    """Whether delta_{K+N} < sqrt(N) / (sqrt(K) + sqrt(N)) holds.

    Constants above 1 (possible for non-normalized dictionaries) simply fail.
    """
    if K < 1 or N < 1:
        raise ValueError(f"need K >= 1 and N >= 1, got K={K}, N={N}")
    if delta < 0 or math.isnan(delta):
        raise ValueError(f"isometry constant must be non-negative, got {delta}")
    return delta < gomp_condition_threshold(K, N)


def verify_correlation_stats(
    phi: SensingMatrix,
    y0: np.ndarray,
    sigma2: float,
    draws: int,
    rng: np.random.Generator,
    mean_z: float = 4.0,
    var_rtol: float = 0.10,
    min_fraction: float = 0.95,
) -> dict:
    """Monte-Carlo check that phi_i^T (y0 + eps) has mean phi_i^T y0 and variance sigma2 ||phi_i||^2."""
    if draws < 1000:
        raise ValueError(f"need at least 1000 draws, got {draws}")
    A = phi.matrix
    noise = math.sqrt(sigma2) * rng.standard_normal((draws, phi.m))
    cr = (y0 + noise) @ A  # (draws, n)
    emp_mean = cr.mean(axis=0)
    emp_var = cr.var(axis=0, ddof=1)
    want_mean = A.T @ y0
    want_var = sigma2 * phi.col_norms**2
    stderr = np.sqrt(want_var / draws)
    mean_ok = np.abs(emp_mean - want_mean) <= mean_z * stderr + 1e-12 * np.abs(want_mean)
    var_ok = np.abs(emp_var - want_var) <= var_rtol * want_var + 1e-12 * (1 + np.abs(want_var))
    frac_mean = float(mean_ok.mean())
    frac_var = float(var_ok.mean())
    return {
        "draws": draws,
        "sigma2": sigma2,
        "atoms": phi.n,
        "fraction_mean_ok": frac_mean,
        "fraction_var_ok": frac_var,
        "max_var_rel_error": float(np.max(np.abs(emp_var - want_var) / np.where(want_var > 0, want_var, 1.0))),
        "passed": frac_mean >= min_fraction and frac_var >= min_fraction,
        "empirical_var": emp_var.tolist(),
        "expected_var": want_var.tolist(),
    }


def psnr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Coefficient-domain PSNR with peak max|x|^2; +inf when the estimate is exact."""
    mse = float(np.mean((x - x_hat) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.max(x**2)) / mse)


def error_trace(truth: SparseSignal, result: PursuitResult) -> np.ndarray:
    return result.x_hat - truth.dense()


def score_trial(
    truth: SparseSignal,
    result: PursuitResult,
    recovery_tol: float,
    atom_rtol: float = 1e-6,
    runtime_seconds: float = 0.0,
) -> TrialMetrics:
    if result.x_hat.shape[0] != truth.n:
        raise ValueError(f"estimate has length {result.x_hat.shape[0]}, truth has {truth.n}")
    x = truth.dense()
    x_hat = result.x_hat
    found = set(int(i) for i in result.support)
    hits = sum(1 for i in truth.support if int(i) in found)
    recall = hits / truth.K if truth.K else 1.0
    err = float(np.linalg.norm(x_hat - x))
    rel = err / float(np.linalg.norm(x))
    atom_tol = atom_rtol * float(np.max(np.abs(x_hat)))
    return TrialMetrics(
        exact_recovery=hits == truth.K and rel <= recovery_tol,
        support_recall=recall,
        relative_l2_error=rel,
        psnr_db=psnr(x, x_hat),
        atom_count=int(np.count_nonzero(np.abs(x_hat) > atom_tol)),
        rms_error=err / math.sqrt(truth.n),
        runtime_seconds=runtime_seconds,
    )


def js_dominance_check(
    theta: np.ndarray,
    s: float,
    p: int,
    draws: int,
    rng: np.random.Generator,
    positive_part: bool = False,
) -> dict:
    """MSE of the shrunk vs. raw correlation vector for Cr = theta + N(0, s I).

    Uses unit-norm atoms and a homoscedastic residual variance ``s``, so the
    per-atom correlation variance equals ``s`` in either variance mode.
    """
    from .pursuit import VarianceMode, js_shrink

    d = theta.size
    eye = SensingMatrix.from_array(np.eye(d))
    sigma2 = np.full(d, s)
    err_raw = np.empty(draws)
    err_js = np.empty(draws)
    positive = 0
    for t in range(draws):
        cr = theta + math.sqrt(s) * rng.standard_normal(d)
        shrunk, _ = js_shrink(cr, sigma2, eye, p, VarianceMode.SCALAR_MEAN, positive_part)
        positive += 1.0 - (p - 2) * s / float(cr @ cr) > 0
        err_raw[t] = float(np.sum((cr - theta) ** 2))
        err_js[t] = float(np.sum((shrunk - theta) ** 2))
    diff = err_raw - err_js
    return {
        "dim": d,
        "s": s,
        "p": p,
        "draws": draws,
        "mse_raw": float(err_raw.mean()),
        "mse_js": float(err_js.mean()),
        "improvement": float(diff.mean()),
        "improvement_stderr": float(diff.std(ddof=1) / math.sqrt(draws)),
        "positive_factor_fraction": positive / draws,
    }
