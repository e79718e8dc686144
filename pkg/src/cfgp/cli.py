"""``cfgp`` command-line entry point.

Exit codes: 0 success, 1 a check or run failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, bench
from .config import RunConfig
from .exceptions import CFGPError, ConfigError

log = logging.getLogger("cfgp")

COMMANDS = {
    "fit": "fit the model to a dataset CSV (data.path)",
    "design": "write an initial design",
    "al-run": "one cost-aware active-learning run on a simulator",
    "one-shot": "spend the budget on one design and fit once",
    "benchmark": "run the method x (phi2_sq, gamma) benchmark matrix",
    "validate-integrals": "check closed forms against quadrature and finite differences",
    "criterion-surface": "export the acquisition criterion on an (x, t) grid",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfgp", description="Continuous-fidelity GP surrogates and cost-aware design.")
    p.add_argument("--version", action="version", version=f"cfgp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", default="cfgp-out", help="output directory (default: %(default)s)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for the benchmark")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _run(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg.set_seed(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    bench.check_config(cfg)
    cmd = args.command
    out = args.out
    if cmd == "fit":
        res = bench.cmd_fit(cfg, out)
        print(f"loglik {res['loglik']:.6g}  gamma {res['gamma']:.4f}  sigma2 {res['sigma2']:.4g}")
    elif cmd == "design":
        res = bench.cmd_design(cfg, out)
        print(f"{res['kind']} design with {res['n']} points, total cost {res['total_cost']:.6g}")
    elif cmd == "al-run":
        res = bench.cmd_al_run(cfg, out)
        print(f"rmse {res['rmse']:.6g}  points {res['n_points']}  cost {res['total_cost']:.6g}  ({res['stop_reason']})")
    elif cmd == "one-shot":
        res = bench.cmd_one_shot(cfg, out)
        print(f"rmse {res['rmse']:.6g}  points {res['n_points']}  cost {res['total_cost']:.6g}")
    elif cmd == "benchmark":
        res = bench.cmd_benchmark(cfg, out, threads=args.threads)
        ch = res["checks"]
        print(f"{len(res['rows'])} rows, {res['n_errors']} failed runs")
        for pre, (a, b) in ch.get("lbm_vs_bm", {}).items():
            print(f"gamma={ch['gamma_top']}: median {pre}-LBM {a:.4g} vs {pre}-BM {b:.4g}")
        print(f"AL-LBM <= OS-LBM in {ch.get('al_beats_os', 0)} of {ch['combos']} combinations")
        return 1 if res["n_errors"] else 0
    elif cmd == "validate-integrals":
        res = bench.cmd_validate(cfg, out)
        print(bench.format_checks(res["rows"]))
        print(f"{'all checks passed' if res['ok'] else 'CHECK FAILURES'} in {res['elapsed']:.1f} s")
        return 0 if res["ok"] else 1
    elif cmd == "criterion-surface":
        res = bench.cmd_criterion_surface(cfg, out)
        b = res["optimizer"]
        print(f"{res['n_rows']} grid rows; optimizer x={b.x[0]:.6f} t={b.t[0]:.6f} value={b.value:.6g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (CFGPError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
