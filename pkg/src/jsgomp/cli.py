"""Command-line entry point: ``jsgomp {sweep-k,sweep-snr,trace,ric,verify}``.

Exit codes: 0 success, 1 configuration/usage error, 2 I/O error,
3 ``verify`` ran but at least one oracle check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench
from .problems import make_instance, snr_from_linear
from .pursuit import ConfigError, HaltNorm, PursuitConfig, gomp, js_gomp, omp

log = logging.getLogger("jsgomp")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_int_grid(text: str) -> list[int]:
    """``"5,10,15"`` or inclusive ``"5:40:5"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            lo, hi = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            if step < 1:
                raise argparse.ArgumentTypeError(f"grid step must be positive in {part!r}")
            out.extend(range(lo, hi + 1, step))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return out


def parse_float_grid(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi, step = (float(b) for b in part.split(":"))
            if step <= 0:
                raise argparse.ArgumentTypeError(f"grid step must be positive in {part!r}")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            out.extend(lo + i * step for i in range(count))
        elif part:
            out.append(float(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return out


def parse_algorithms(text: str) -> dict[str, list[int]]:
    """``"omp,gomp:2/4/6,js_gomp:2"`` -> {"omp": [1], "gomp": [2, 4, 6], "js_gomp": [2]}."""
    algs: dict[str, list[int]] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, Ns = part.partition(":")
        algs[name] = [int(N) for N in Ns.split("/")] if Ns else [1 if name == "omp" else 2]
    return algs


def _global_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path, default=S, help="JSON experiment config")
    g.add_argument("--seed", type=int, default=S, help="master seed")
    g.add_argument("--out", type=Path, default=S, help="output path prefix")
    g.add_argument("--format", choices=["csv", "json"], default=S)
    g.add_argument("--jobs", type=int, default=S, help="worker processes")
    g.add_argument("--snr-linear", action="store_true", default=S,
                   help="read SNR values as power ratios instead of dB")
    g.add_argument("--js-mode", choices=["scalar", "quadratic"], default=S)
    g.add_argument("--js-positive-part", action="store_true", default=S)
    g.add_argument("--select-raw", action="store_true", default=S,
                   help="select atoms by the unshrunk correlation")
    g.add_argument("--print-schema", action="store_true", default=S,
                   help="print the config JSON schema and exit")
    g.add_argument("-q", "--quiet", action="store_true", default=S)


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--m", type=int, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--K", dest="K_grid", type=parse_int_grid, default=S, help='e.g. "5:40:5"')
    p.add_argument("--snr", dest="snr_db", type=parse_float_grid, default=S, help='e.g. "4" or "0:20:4"')
    p.add_argument("--p", type=int, default=S, help="ensemble size")
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--algorithms", type=parse_algorithms, default=S, help='e.g. "omp,gomp:2,js_gomp:2"')
    p.add_argument("--recovery-tol", type=float, default=S)
    p.add_argument("--halt-norm", choices=[h.value for h in HaltNorm], default=S)
    p.add_argument("--baseline-single-column", action="store_true", default=S,
                   help="OMP/gOMP see one noisy column instead of the ensemble mean")
    p.add_argument("--no-timing", dest="timing", action="store_false", default=S,
                   help="write zero runtimes so outputs are byte-reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jsgomp", description=__doc__.splitlines()[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sk = sub.add_parser("sweep-k", help="exact-recovery frequency versus sparsity K")
    ss = sub.add_parser("sweep-snr", help="atom count and PSNR versus SNR at fixed K")
    tr = sub.add_parser("trace", help="per-index reconstructions of one instance")
    for p in (sk, ss, tr):
        _global_flags(p)
        _experiment_flags(p)
    tr.add_argument("--trial-seed", type=int, default=None,
                    help="instance seed (default: child seed of trial 0)")

    ric = sub.add_parser("ric", help="restricted isometry constants and gOMP condition verdicts")
    _global_flags(ric)
    ric.add_argument("--m", type=int, default=8)
    ric.add_argument("--n", type=int, default=12)
    ric.add_argument("--K-max", type=int, default=3)
    ric.add_argument("--method", choices=["exhaustive", "random"], default="exhaustive")
    ric.add_argument("--budget", type=int, default=None)
    ric.add_argument("--N", dest="N_list", type=parse_int_grid, default=[1, 2])

    ver = sub.add_parser("verify", help="run the analysis oracles and report JSON")
    _global_flags(ver)
    ver.add_argument("--draws", type=int, default=4000)
    return parser


def load_config(args: argparse.Namespace) -> bench.ExperimentConfig:
    doc: dict = {}
    if getattr(args, "config", None) is not None:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    overrides = {
        "master_seed": "seed", "jobs": "jobs", "m": "m", "n": "n", "K_grid": "K_grid",
        "snr_db": "snr_db", "p": "p", "trials": "trials", "algorithms": "algorithms",
        "recovery_tol": "recovery_tol", "halt_norm": "halt_norm",
        "baseline_single_column": "baseline_single_column", "timing": "timing",
        "js_positive_part": "js_positive_part", "select_raw": "select_raw", "js_mode": "js_mode",
    }
    for field_name, attr in overrides.items():
        if hasattr(args, attr):
            doc[field_name] = getattr(args, attr)
    cfg = bench.ExperimentConfig.from_dict(doc)
    if getattr(args, "snr_linear", False):
        try:
            cfg.snr_db = [s if math.isinf(s) else snr_from_linear(s) for s in cfg.snr_db]
        except ValueError as exc:
            raise ConfigError(f"field 'snr_db': {exc}") from exc
    return cfg


def _progress(quiet: bool):
    if quiet:
        return None
    last = [-1]

    def report(done: int, total: int):
        pct = 100 * done // total
        if pct // 10 != last[0] // 10 or done == total:
            last[0] = pct
            print(f"  {done}/{total} blocks ({pct}%)", file=sys.stderr)

    return report


def _out(args) -> Path:
    return getattr(args, "out", Path("results") / args.command.replace("-", "_"))


def cmd_sweep(args, snr: bool) -> int:
    cfg = load_config(args)
    if snr and not hasattr(args, "K_grid") and "K_grid" not in _config_keys(args):
        cfg.K_grid = [5]
        cfg.algorithms = {"omp": [1], "gomp": [1], "js_gomp": [1]}
        if not hasattr(args, "snr_db") and "snr_db" not in _config_keys(args):
            cfg.snr_db = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 30.0, 40.0]
    run = bench.run_snr_sweep if snr else bench.run_sparsity_sweep
    table = run(cfg, progress=_progress(getattr(args, "quiet", False)))
    fmt = getattr(args, "format", "csv")
    raw_path, agg_path = table.write(_out(args), fmt)
    print(f"wrote {raw_path} and {agg_path}")
    return EXIT_OK


def _config_keys(args) -> set:
    if getattr(args, "config", None) is None:
        return set()
    return set(json.loads(Path(args.config).read_text(encoding="utf-8")))


def cmd_trace(args) -> int:
    cfg = load_config(args)
    if not hasattr(args, "K_grid") and "K_grid" not in _config_keys(args):
        cfg.K_grid = [5]
        cfg.algorithms = {"omp": [1], "gomp": [1], "js_gomp": [1]}
    seed = args.trial_seed
    if seed is None:
        from .problems import child_seed

        seed = child_seed(cfg.master_seed, cfg.K_grid[0], 0)
    path = bench.dump_error_trace(cfg, seed, _out(args), getattr(args, "format", "csv"))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_ric(args) -> int:
    if args.method == "random" and not args.budget:
        raise ConfigError("field 'budget': random-support probing needs --budget >= 1")
    try:
        path = bench.probe_ric(
            args.m, args.n, args.K_max, analysis.RicMethod(args.method), args.budget,
            getattr(args, "seed", 0), _out(args), args.N_list, getattr(args, "format", "csv"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    print(f"wrote {path}")
    return EXIT_OK


def run_verification(seed: int = 0, draws: int = 4000) -> dict:
    """The analysis oracles on small seeded instances."""
    rng = np.random.default_rng(seed)
    report: dict = {"seed": seed}

    inst = make_instance(50, 500, 5, 5, 4.0, seed)
    stats = analysis.verify_correlation_stats(inst.phi, inst.ens.y0, inst.ens.sigma2, draws, rng)
    report["correlation_stats"] = {k: v for k, v in stats.items() if not isinstance(v, list)}

    toy = 20
    zero_residual = 0
    mismatches = 0
    for t in range(toy):
        small = make_instance(8, 12, 2, 5, math.inf, seed + 1 + t)
        best = analysis.l0_oracle(small.phi, small.ens.y0, 2)
        resid = float(np.linalg.norm(small.ens.y0 - small.phi.matrix @ best.dense()))
        zero_residual += resid <= 1e-10
        res = omp(small.phi, small.ens.y0, PursuitConfig(N=1, K=2))
        if analysis.score_trial(small.x, res, 1e-4).exact_recovery:
            mismatches += list(res.support) != list(best.support)
    report["l0_oracle"] = {
        "instances": toy,
        "zero_residual": zero_residual,
        "support_mismatches": mismatches,
        "passed": zero_residual == toy and mismatches == 0,
    }

    phi = make_instance(8, 12, 2, 5, math.inf, seed).phi
    ex = analysis.estimate_ric(phi, 2)
    sampled = analysis.estimate_ric(phi, 2, analysis.RicMethod.RANDOM_SUPPORTS, 30, rng)
    report["ric"] = {
        "exhaustive_delta2": ex.delta_lower,
        "sampled_delta2": sampled.delta_lower,
        "passed": sampled.delta_lower <= ex.delta_lower,
    }

    theta = rng.standard_normal(50)
    dom = analysis.js_dominance_check(theta, 1.0, 5, 2000, rng)
    dom["passed"] = dom["improvement"] > 0
    report["js_dominance"] = dom

    inst = make_instance(50, 500, 8, 5, math.inf, seed)
    cfg = PursuitConfig(N=2, K=8)
    a = gomp(inst.phi, inst.ens.y0, cfg)
    b = js_gomp(inst.phi, inst.ens, cfg)
    report["noiseless_reduction"] = {"passed": list(a.support) == list(b.support)}

    report["passed"] = all(v.get("passed", True) for v in report.values() if isinstance(v, dict))
    return report


def cmd_verify(args) -> int:
    report = run_verification(getattr(args, "seed", 0), args.draws)
    text = json.dumps(report, indent=1)
    if hasattr(args, "out"):
        path = Path(args.out).with_name(f"{Path(args.out).name}_verify.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
        print(f"wrote {path}")
    else:
        print(text)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    if getattr(args, "print_schema", False):
        print(json.dumps(bench.CONFIG_SCHEMA, indent=1))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep-k":
            return cmd_sweep(args, snr=False)
        if args.command == "sweep-snr":
            return cmd_sweep(args, snr=True)
        if args.command == "trace":
            return cmd_trace(args)
        if args.command == "ric":
            return cmd_ric(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"jsgomp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"jsgomp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
