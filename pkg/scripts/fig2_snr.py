"""Atom count and coefficient PSNR versus SNR at K=5, N=1."""

import argparse
import time

from jsgomp.bench import ExperimentConfig, paired_difference, run_snr_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=500)
ap.add_argument("--K", type=int, default=5)
ap.add_argument("--snr", default="0,4,8,12,16,20,30")
ap.add_argument("--jobs", type=int, default=1)
ap.add_argument("--out", default="results/fig2")
args = ap.parse_args()

grid = [float(s) for s in args.snr.split(",")]
cfg = ExperimentConfig(trials=args.trials, K_grid=[args.K], snr_db=grid, jobs=args.jobs,
                       algorithms={"omp": [1], "gomp": [1], "js_gomp": [1]})
t0 = time.time()
table = run_snr_sweep(cfg)
table.write(args.out)
print(f"{time.time() - t0:.1f} s")
print(f"{'snr':>5} {'atoms g':>8} {'atoms js':>8} {'psnr omp':>9} {'psnr g':>8} {'psnr js':>8} {'d psnr':>8} {'se':>6}")
for s in grid:
    rows = {r["algorithm"]: r for r in table.aggregate if r["snr_db"] == s}
    d, se, _ = paired_difference(table.raw, ("js_gomp", 1), ("gomp", 1), "psnr_db", args.K, s)
    print(f"{s:5.0f} {rows['gomp']['mean_atom_count']:8.2f} {rows['js_gomp']['mean_atom_count']:8.2f} "
          f"{rows['omp']['mean_psnr']:9.3f} {rows['gomp']['mean_psnr']:8.3f} {rows['js_gomp']['mean_psnr']:8.3f} "
          f"{d:8.4f} {se:6.4f}")
