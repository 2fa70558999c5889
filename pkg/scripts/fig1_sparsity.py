"""Exact-recovery frequency versus sparsity K at SNR 4 dB (ensemble p=5, N=2)."""

import argparse
import time

from jsgomp.bench import ExperimentConfig, critical_sparsity, paired_difference, run_sparsity_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=500)
ap.add_argument("--snr", type=float, default=4.0)
ap.add_argument("--jobs", type=int, default=1)
ap.add_argument("--single-column", action="store_true")
ap.add_argument("--out", default="results/fig1")
args = ap.parse_args()

cfg = ExperimentConfig(trials=args.trials, snr_db=[args.snr], jobs=args.jobs,
                       baseline_single_column=args.single_column)
t0 = time.time()
table = run_sparsity_sweep(cfg)
table.write(args.out)
print(f"{time.time() - t0:.1f} s")
print(f"{'K':>3} {'omp':>6} {'gomp':>6} {'js':>6} {'js-gomp':>8} {'se':>6}")
for K in cfg.K_grid:
    f = {r["algorithm"]: r["success_frequency"] for r in table.aggregate if r["K"] == K}
    d, se, _ = paired_difference(table.raw, ("js_gomp", 2), ("gomp", 2), "exact_recovery", K, args.snr)
    print(f"{K:>3} {f.get('omp', float('nan')):6.3f} {f.get('gomp', float('nan')):6.3f} "
          f"{f.get('js_gomp', float('nan')):6.3f} {d:8.4f} {se:6.4f}")
for alg in ("omp", "gomp", "js_gomp"):
    print(alg, "critical sparsity", critical_sparsity(table.select(alg)))
