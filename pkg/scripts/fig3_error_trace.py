"""Per-index reconstruction error at K=5, N=1, SNR 4 dB; RMS over many trials plus one trace file."""

import argparse
import math

import numpy as np

from jsgomp.bench import ExperimentConfig, dump_error_trace, run_sparsity_sweep
from jsgomp.problems import child_seed

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=100)
ap.add_argument("--snr", type=float, default=4.0)
ap.add_argument("--out", default="results/fig3")
args = ap.parse_args()

cfg = ExperimentConfig(trials=args.trials, K_grid=[5], snr_db=[args.snr],
                       algorithms={"omp": [1], "gomp": [1], "js_gomp": [1]})
table = run_sparsity_sweep(cfg)
for alg in ("omp", "gomp", "js_gomp"):
    rms = [r.rms_error for r in table.raw if r.algorithm == alg]
    print(f"{alg:8s} RMS error {math.sqrt(np.mean(np.square(rms))):.6f}")
print("trace:", dump_error_trace(cfg, child_seed(cfg.master_seed, 5, 0), args.out))
