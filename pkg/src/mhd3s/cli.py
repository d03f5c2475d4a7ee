"""Command-line entry point: ``mhd3s <subcommand> [flags]``.

Exit codes: 0 success, 1 validation error, 2 numerical blow-up,
3 acceptance failure in ``report``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import spectral as sp
from .config import ConfigError, RunConfig

EXIT_OK, EXIT_INVALID, EXIT_BLOWUP, EXIT_ACCEPT = 0, 1, 2, 3

log = logging.getLogger("mhd3s")


class _Parser(argparse.ArgumentParser):
    """argparse with validation errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _grid_arg(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.lower().replace("x", ",").split(",") if p]
    if len(parts) == 1:
        return (parts[0],) * 3
    if len(parts) == 2:
        return (parts[0], parts[1], 1)
    if len(parts) == 3:
        return tuple(parts)
    raise argparse.ArgumentTypeError(f"bad grid {text!r}")


def _eps_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _common(p: argparse.ArgumentParser, required_out: bool = True) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--out", required=required_out, help="output directory")
    p.add_argument("--log-level", default=None)


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsM", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--nu", type=float)
    g.add_argument("--epsA", type=float)
    p.add_argument("--mu-lim", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--grid", type=_grid_arg)
    p.add_argument("--T", type=float)
    p.add_argument("--integrator")
    p.add_argument("--dt-cfl", type=float)
    p.add_argument("--fast-factor", type=float)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mhd3s", description="Three-scale MHD singular-limit solver and rate harness")
    parser.add_argument("--version", action="version", version=f"mhd3s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify-operators", help="check operator identities on random modes and states")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--modes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=16, help="cube size for state-level checks")
    p.add_argument("--out", help="also write the report to this directory")

    p = sub.add_parser("run", help="integrate the full model from well-prepared data")
    _common(p, required_out=False)
    _model_flags(p)

    p = sub.add_parser("run-limit", help="integrate the limit system and corrector")
    _common(p, required_out=False)
    _model_flags(p)

    p = sub.add_parser("sweep", help="ε_M sweep with error metrics")
    _common(p, required_out=False)
    _model_flags(p)
    p.add_argument("--eps-list", type=_eps_list)
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("report", help="fit slopes and compare with predictions")
    p.add_argument("--table", required=True, help="rate_table.csv from a sweep")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--mu-lim", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=0.3)
    p.add_argument("--tol-slowV", type=float, default=0.2)
    p.add_argument("--mode", choices=("sup", "final"), default="sup")
    p.add_argument("--out", help="directory for report.json")
    return parser


def _resolve(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    upd: dict = {}
    flag_map = {
        "epsM": "eps_m",
        "nu": "nu",
        "epsA": "eps_a",
        "mu_lim": "mu_lim",
        "gamma": "gamma",
        "n": "n",
        "T": "t_end",
        "integrator": "integrator",
        "dt_cfl": "cfl",
        "fast_factor": "fast_factor",
        "seed": "init_seed",
        "eps_list": "eps_list",
        "jobs": "jobs",
        "out": "out",
        "log_level": "log_level",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            upd[key] = v
    grid = getattr(args, "grid", None)
    if grid is not None:
        upd.update(nx=grid[0], ny=grid[1], nz=grid[2])
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        upd[k.strip()] = v.strip()
    return cfg.with_updates(upd)


def _manifest(cfg: RunConfig, command: str, extra: dict | None = None) -> dict:
    doc = {
        "command": command,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_hash": cfg.content_hash(),
        "config": cfg.to_text().splitlines(),
        "created_unix": time.time(),
    }
    if extra:
        doc.update(extra)
    return doc


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, tuple)):
        return list(o)
    return str(o)


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_operators(args) -> int:
    from .operators import random_modes, verify_eigenstructure
    from .state import State

    if not 0.0 <= args.mu < 1.0:
        raise ConfigError(f"--mu must lie in [0, 1), got {args.mu}")
    if args.modes < 1:
        raise ConfigError("--modes must be positive")
    rng = np.random.default_rng(args.seed)
    reports = [verify_eigenstructure(k, l, m, args.mu) for k, l, m in random_modes(rng, args.modes)]
    failed = [r.to_dict() for r in reports if not r.ok]
    state_checks = _state_operator_checks(State, sp.Grid.cube(args.grid), args.mu, rng)
    doc = {
        "mu": args.mu,
        "modes": args.modes,
        "seed": args.seed,
        "eigen_failures": failed,
        "max_intermediate_error": max((r.intermediate_error for r in reports if r.intermediate_error is not None), default=0.0),
        "state_checks": state_checks,
        "passed": not failed and all(v < 1e-10 for v in state_checks.values()),
    }
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default)
    print(text)
    if args.out:
        _write_json(Path(args.out) / "report.json", doc)
    return EXIT_OK if doc["passed"] else EXIT_ACCEPT


def _random_state(State, grid, rng):
    c = rng.standard_normal((7,) + grid.spectral_shape) + 1j * rng.standard_normal((7,) + grid.spectral_shape)
    k = np.sqrt(np.broadcast_to(grid.k2, grid.spectral_shape))
    hat = sp.enforce_hermitian(grid, c * np.exp(-0.5 * k))
    hat[4:] = sp.leray(grid, hat[4:])
    return State(grid, hat)


def _state_operator_checks(State, grid, mu, rng) -> dict:
    from .operators import decompose_modes, project_P, project_P0, project_P1, verify_vab_identity

    s = _random_state(State, grid, rng)
    p0, p1, p = project_P0(s), project_P1(s), project_P(s)
    modes = decompose_modes(s)
    vab = verify_vab_identity(s, mu) if mu > 0 else {"alpha": 0.0, "beta": 0.0}
    nrm = s.norm(0)
    return {
        "P0_idempotent": (project_P0(p0) - p0).norm(0) / nrm,
        "P1_idempotent": (project_P1(p1) - p1).norm(0) / nrm,
        "P0P1_commute": (project_P0(p1) - project_P1(p0)).norm(0) / nrm,
        "P_idempotent": (project_P(p) - p).norm(0) / nrm,
        "mode_completeness": (modes.total() - s).norm(0) / nrm,
        "vab_alpha": vab["alpha"] / nrm,
        "vab_beta": vab["beta"] / nrm,
    }


def _setup_logging(cfg: RunConfig) -> None:
    level = getattr(logging, str(cfg.log_level).upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    from .initdata import build_well_prepared, validate_initial
    from .solver import run

    cfg = _resolve(args)
    _setup_logging(cfg)
    params = cfg.params()
    grid = sp.Grid(*cfg.grid_shape())
    solver = cfg.solver()
    out = Path(cfg.out)
    V0 = build_well_prepared(cfg.init(), params, grid)
    check = validate_initial(V0, params)
    res = run(V0, params, solver, out_dir=out, keep_states=False)
    _write_json(
        out / "manifest.json",
        _manifest(cfg, "run", {"params": params.as_dict(), "initial": check, "status": res.status,
                               "message": res.message, "steps": res.steps, "wall_time": res.wall_time}),
    )
    log.info("run %s after %d steps (%.1fs)", res.status, res.steps, res.wall_time)
    return EXIT_OK if res.completed else EXIT_BLOWUP


def cmd_run_limit(args) -> int:
    import csv

    from .harness import limit_initial
    from .initdata import make_pieces
    from .limit import LIMIT_NAMES, LimitConfig, run_limit
    from .snapshot import write_snapshot

    cfg = _resolve(args)
    _setup_logging(cfg)
    params = cfg.params()
    nx, ny, nz = cfg.grid_shape()
    if nz == 1:
        nz = max(nx, ny)
    pieces = make_pieces(cfg.init(), sp.Grid(nx, ny, nz))
    L0 = limit_initial(pieces)
    lcfg = LimitConfig(t_end=cfg.t_end, cfl=cfg.limit_cfl, n_samples=cfg.n_samples, dealias=cfg.dealias)
    traj = run_limit(L0, cfg.mu_lim, lcfg, corrector_mu=params.mu)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm_0", "energy", "divergence", "corrector_norm_0"])
        for t, L, e, d, C in zip(traj.times, traj.states, traj.energy, traj.divergence, traj.correctors):
            w.writerow([repr(float(t)), repr(L.norm(0)), repr(e), repr(d), repr(sp.sobolev_norm(L.grid, C.hat))])
    if cfg.snapshot_every > 0:
        for k, L in enumerate(traj.states):
            if k % cfg.snapshot_every == 0:
                fields = dict(zip(LIMIT_NAMES, L.physical()))
                fields["b3"] = sp.inverse(L.grid, L.b3(cfg.mu_lim))
                write_snapshot(out / f"limit_{k:04d}.bin", fields)
    _write_json(out / "manifest.json", _manifest(cfg, "run-limit", {"steps": traj.steps}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import RatePrediction, report, report_text, sweep

    cfg = _resolve(args)
    _setup_logging(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = cfg.jobs
    if "MHD3S_THREADS" in os.environ:
        jobs = min(jobs, sp.fft_workers())
    table = sweep(cfg.sweep(), out_dir=out, jobs=jobs)
    table.to_csv(out / "rate_table.csv")
    table.to_json(out / "rate_table.json")
    doc = report(table, RatePrediction(cfg.nu, cfg.n, cfg.mu_lim), _checks(cfg.slope_tol, cfg.slope_tol_slowV), cfg.mode)
    _write_json(out / "report.json", doc)
    print(report_text(doc))
    _write_json(out / "manifest.json", _manifest(cfg, "sweep", {"failures": table.failures}))
    return EXIT_BLOWUP if table.failures else EXIT_OK


def _checks(tol: float, tol_v: float):
    return (("E_fast", 0, tol), ("E_int", 1, tol), ("E_slowH", None, tol), ("E_slowV", None, tol_v),
            ("E_slowV_cor", None, tol))


def cmd_report(args) -> int:
    from .harness import RatePrediction, RateTable, report, report_text

    path = Path(args.table)
    if not path.is_file():
        raise ConfigError(f"rate table {path} not found")
    table = RateTable.from_csv(path)
    doc = report(table, RatePrediction(args.nu, args.n, args.mu_lim), _checks(args.tol, args.tol_slowV), args.mode)
    print(report_text(doc))
    if args.out:
        _write_json(Path(args.out) / "report.json", doc)
    return EXIT_OK if doc["passed"] else EXIT_ACCEPT


COMMANDS = {
    "verify-operators": cmd_verify_operators,
    "run": cmd_run,
    "run-limit": cmd_run_limit,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"mhd3s: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
