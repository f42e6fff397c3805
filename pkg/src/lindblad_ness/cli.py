"""Command-line interface.

Examples:
  lindblad-ness ness --method oracle --model heisenberg --n 4 --delta 1.5 --mu 0.1
  lindblad-ness sweep --method exact --model xx --n-list 10 20 40 80 --gamma 0.5 --mu 0.1
  lindblad-ness correlations --method exact --model xx --n 40 --gamma 0.5 --mu 0.1
  lindblad-ness gap --model xx --n 4 --gamma 0.5 --mu 0.1

Parameters come from the built-in defaults, then ``--config FILE.json``
(same keys as :class:`~lindblad_ness.transport.ExperimentConfig`), then the
command-line flags. Outputs go under ``--out``, or ``$LINDBLAD_NESS_OUT``,
or ``./lindblad_ness_runs``.

Exit status: 0 on success, 1 if any steady-state run did not converge or a
scaling fit failed, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .transport import (
    ConfigError,
    ExperimentConfig,
    correlation_report,
    gap_report,
    run_experiment,
    scaling_sweep,
    write_correlations,
)

# flag dest -> config key where they differ
_RENAME = {"model": "family", "dmax": "D_max", "trunc_eps": "eps_trunc", "conv_eps": "eps_conv"}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file with config keys; flags override it")
    p.add_argument("--method", choices=["tebd", "oracle", "exact"])
    p.add_argument("--model", choices=["heisenberg", "xx"])
    p.add_argument("--n", type=int)
    p.add_argument("--n-list", type=int, nargs="+", dest="n_list")
    p.add_argument("--J", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--dmax", type=int)
    p.add_argument("--trunc-eps", type=float, dest="trunc_eps")
    p.add_argument("--conv-eps", type=float, dest="conv_eps")
    p.add_argument("--conv-window", type=float, dest="conv_window")
    p.add_argument("--t-max", type=float, dest="t_max")
    p.add_argument("--richardson", action="store_true", help="extrapolate dt and dt/2 steady states")
    p.add_argument("--initial", choices=["identity", "linear"], help="TEBD starting state")
    p.add_argument("--convention", choices=["literal", "consistent"], help="closed-form boundary convention")
    p.add_argument("--threads", type=int, help="concurrent sweep points")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output root directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lindblad-ness", description="Steady states of boundary-driven spin chains.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("ness", parents=[common], help="one steady state; writes profile CSV and summary JSON")
    sub.add_parser("sweep", parents=[common], help="steady states over --n-list and the current exponent")
    sub.add_parser("correlations", parents=[common], help="connected zz table and plateau statistic")
    sub.add_parser("gap", parents=[common], help="Liouvillian gap of the dense generator")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "config")}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text()))
    for k, v in flags.items():
        values[_RENAME.get(k, k)] = v
    if "n_list" in flags and "n" not in flags:
        values["n"] = min(flags["n_list"])
    return ExperimentConfig.from_dict(values)


def _cmd_ness(cfg: ExperimentConfig) -> int:
    status = 0
    for n in cfg.sizes:
        res = run_experiment(cfg.for_size(n))
        rep = res.report
        print(
            f"n={n} converged={rep.converged} t={rep.time:g} <j>={rep.mean_current:.10g} "
            f"z1={rep.magnetization[0]:.10g} zn={rep.magnetization[-1]:.10g} -> {res.summary_path}"
        )
        if not res.converged:
            status = 1
    return status


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    res = scaling_sweep(cfg)
    print("n,current,z_first,z_last,kappa,kappa_bulk,converged")
    for r in res.rows:
        print(f"{r.n},{r.current:.10g},{r.z_first:.10g},{r.z_last:.10g},{r.kappa:.6g},{r.kappa_bulk:.6g},{r.converged}")
    if res.fit is None:
        print(f"fit failed: {res.fit_error}")
        return 1
    print(f"alpha={res.fit.alpha:.6f} +- {res.fit.alpha_stderr:.2e}")
    return 0 if res.converged else 1


def _cmd_correlations(cfg: ExperimentConfig) -> int:
    reports = [correlation_report(cfg, n) for n in cfg.sizes]
    out = write_correlations(cfg, reports)
    for r in reports:
        print(f"n={r.n} max|C|(|j-k|>=2)={r.plateau:.10g} n*max|C|/mu^2={r.statistic:.6g}")
    print(f"-> {out}")
    return 0


def _cmd_gap(cfg: ExperimentConfig) -> int:
    for n in cfg.sizes:
        g = gap_report(cfg, n)
        print(json.dumps(dataclasses.asdict(g)))
    return 0


COMMANDS = {"ness": _cmd_ness, "sweep": _cmd_sweep, "correlations": _cmd_correlations, "gap": _cmd_gap}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        cfg = config_from_args(args)
    except (ConfigError, TypeError, ValueError, OSError) as e:
        parser.error(str(e))
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        parser.error(str(e))


if __name__ == "__main__":
    sys.exit(main())
