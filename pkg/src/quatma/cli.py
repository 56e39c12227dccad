"""Command-line entry point: ``quatma <subcommand> --config run.json``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import differential as dops
from .config import Config, ConfigError
from .grid import GridFunction, StencilOutOfBoundsError
from .hyperhermitian import (
    EigenGroupingError,
    NotHyperhermitianError,
    moore_det_oracle,
    q_eigenvalues,
    read_matrix_file,
)
from .properties import format_table, run_all
from .regularization import inf_convolution, sup_convolution
from .solver import SolverError, solve_dirichlet

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

class NumericalFailure(RuntimeError):
    pass


def _load(args) -> Config:
    if args.config is None:
        cfg = Config.from_dict({})
    else:
        cfg = Config.load(args.config)
    if args.seed is not None:
        cfg.seed = int(args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = int(args.threads)
    return cfg


def _outdir(args) -> Path:
    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(cfg: Config, args) -> int:
    problem = cfg.problem()
    grid = cfg.make_grid()
    dirs = cfg.directions()
    echo = cfg.to_dict()
    try:
        u, report = solve_dirichlet(
            problem, grid, dirs, tol=cfg.tol, max_iter=cfg.max_iter, tau_factor=cfg.tau_factor,
            init=cfg.init, stencil_radius=cfg.stencil_radius, threads=cfg.threads, config_echo=echo,
        )
    except StencilOutOfBoundsError as e:
        raise ConfigError(f"{e} (increase 'padding')") from None
    out = _outdir(args)
    u.to_csv(out / cfg.output_csv)
    (out / cfg.output_report).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"iterations   {report.iterations}")
    print(f"residual     {report.residual:.3e}")
    if report.linf_error is not None:
        print(f"linf_error   {report.linf_error:.3e}")
    if report.direction_gap is not None:
        print(f"dir. gap     {report.direction_gap:.3e}")
    print(f"wrote {out / cfg.output_csv} and {out / cfg.output_report}")
    if not report.converged:
        raise NumericalFailure(f"no convergence after {report.iterations} sweeps (residual {report.residual:.3e})")
    return EXIT_OK


def cmd_moore_det(cfg: Config, args) -> int:
    path = args.matrix or cfg.matrix_file
    if path is None:
        raise ConfigError("moore-det needs a matrix file (--matrix or 'matrix_file')")
    path = Path(path) if args.matrix else cfg.resolve(path)
    try:
        X = read_matrix_file(path)
    except FileNotFoundError:
        raise ConfigError(f"matrix file not found: {path}") from None
    except (NotHyperhermitianError, ValueError) as e:
        raise ConfigError(str(e)) from None
    spec = q_eigenvalues(X)
    eig = float(np.prod(spec.values))
    print(f"n            {X.n}")
    print("eigenvalues  " + " ".join(f"{v:.12g}" for v in spec.values))
    print(f"eigenvalue   {eig:.15g}")
    if X.n <= 4:
        print(f"oracle       {moore_det_oracle(X):.15g}")
    else:
        print("oracle       n/a (n > 4)")
    return EXIT_OK


def cmd_psh_check(cfg: Config, args) -> int:
    expr = cfg.expression("field", with_t=False)
    u = dops.ScalarField(expr.field(cfg.n), cfg.n)
    pts = cfg.sample_points(cfg.samples, np.random.default_rng(cfg.seed))
    try:
        res = dops.psh_check(u, pts)
    except ValueError as e:
        raise NumericalFailure(str(e)) from None
    print(f"samples      {len(pts)}")
    print(f"min eig      {res.min_eigenvalue:.6g}")
    if res.ok:
        print("verdict      PSH on all samples")
    else:
        print("verdict      not PSH")
        print("witness      " + " ".join(f"{v:.6g}" for v in res.witness))
    return EXIT_OK


def cmd_convolve(cfg: Config, args) -> int:
    expr = cfg.expression("field", with_t=False)
    grid = cfg.make_grid()
    dom = cfg.make_domain()
    try:
        f = GridFunction.from_function(grid, dom, expr.field(cfg.n))
    except ValueError as e:
        raise NumericalFailure(str(e)) from None
    try:
        if cfg.convolution == "sup":
            out = sup_convolution(f, cfg.delta, cfg.A)
        else:
            out = inf_convolution(f, cfg.delta, cfg.A)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    dest = _outdir(args) / (cfg.output_csv if cfg.output_csv != "solution.csv" else "convolution.csv")
    out.to_csv(dest)
    print(f"{cfg.convolution}-convolution on {int(out.interior.sum())} nodes -> {dest}")
    return EXIT_OK


def cmd_validate(cfg: Config, args) -> int:
    cfg.validate()
    print("config OK")
    return EXIT_OK


def cmd_properties(cfg: Config, args) -> int:
    results = run_all(cfg.seed)
    print(f"seed {cfg.seed}")
    print(format_table(results))
    if not all(r.ok for r in results):
        raise NumericalFailure("some invariant suites failed")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "moore-det": cmd_moore_det,
    "psh-check": cmd_psh_check,
    "convolve": cmd_convolve,
    "validate": cmd_validate,
    "properties": cmd_properties,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--output-dir", help="directory for CSV/JSON artifacts (default: .)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads for solver sweeps")
    p = argparse.ArgumentParser(prog="quatma", description="Quaternionic Monge-Ampere toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "moore-det":
            sp.add_argument("--matrix", help="matrix file (overrides 'matrix_file')")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, SolverError, EigenGroupingError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # remaining precondition failures (empty grid, bad matrix file, ...)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
