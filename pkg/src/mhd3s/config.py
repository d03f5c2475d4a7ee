"""Flat ``key = value`` run configuration with lossless round trip and content hash."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from .harness import SweepConfig
from .initdata import InitSpec
from .params import ScaleParams
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    """Every setting of a run, sweep or report.

    Init-data keys carry the prefix ``init_`` (e.g. ``init_seed``); the
    solver, limit and harness settings are unprefixed.
    """

    # scale parameters
    eps_m: float = 0.1
    nu: float = 0.5
    eps_a: float = 0.0
    mu_lim: float = 0.0
    gamma: float = 5.0 / 3.0
    n: int = 3
    # grid: nz = 1 selects a horizontal grid
    nx: int = 32
    ny: int = 32
    nz: int = 32
    # solver
    integrator: str = "lawson-rk4"
    cfl: float = 0.4
    stiff_factor: float = 0.5
    fast_factor: float = 0.25
    dt: float = 0.0
    t_end: float = 0.5
    dealias: bool = True
    n_samples: int = 20
    snapshot_every: int = 0
    blowup_norm: float = 1e6
    # limit system
    limit_cfl: float = 0.4
    # harness
    eps_list: tuple = (0.2, 0.1, 0.05, 0.025)
    jobs: int = 1
    slope_tol: float = 0.3
    slope_tol_slowV: float = 0.2
    mode: str = "sup"
    # initial data
    init_seed: int = 0
    init_kmax: float = 6.0
    init_k0: float = 2.0
    init_decay: float = 4.0
    init_amp_r_S: float = 0.5
    init_amp_uh_S: float = 0.5
    init_amp_u3_S: float = 0.5
    init_amp_bh_S: float = 0.5
    init_mean_b3: float = 1.0
    init_amp_r_I: float = 0.5
    init_amp_uh_F: float = 0.5
    init_amp_u3_I: float = 0.5
    init_amp_b_F: float = 0.5
    # output
    out: str = "runs/out"
    log_level: str = "INFO"

    # conversions ---------------------------------------------------------

    def params(self, eps_m: float | None = None) -> ScaleParams:
        em = self.eps_m if eps_m is None else eps_m
        if self.eps_a > 0 and eps_m is None:
            return ScaleParams(em, self.eps_a, mu_lim=self.mu_lim, gamma=self.gamma, n=self.n)
        return ScaleParams.from_nu(em, self.nu, mu_lim=self.mu_lim, gamma=self.gamma, n=self.n)

    def grid_shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def solver(self) -> SolverConfig:
        return SolverConfig(
            integrator=self.integrator,
            cfl=self.cfl,
            stiff_factor=self.stiff_factor,
            fast_factor=self.fast_factor,
            dt=self.dt,
            t_end=self.t_end,
            dealias=self.dealias,
            n_samples=self.n_samples,
            snapshot_every=self.snapshot_every,
            blowup_norm=self.blowup_norm,
        )

    def init(self) -> InitSpec:
        kw = {f.name[5:]: getattr(self, f.name) for f in fields(self) if f.name.startswith("init_")}
        return InitSpec(**kw)

    def sweep(self) -> SweepConfig:
        return SweepConfig(
            nu=self.nu,
            eps_list=tuple(self.eps_list),
            grid=self.grid_shape(),
            mu_lim=self.mu_lim,
            gamma=self.gamma,
            n=self.n,
            solver=self.solver(),
            limit_cfl=self.limit_cfl,
            init=self.init(),
        )

    # text form -----------------------------------------------------------

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_updates(self, updates: dict) -> "RunConfig":
        """Copy with string or typed values for the named keys."""
        types = {f.name: f.type for f in fields(self)}
        kw = {}
        for k, v in updates.items():
            if k not in types:
                raise ConfigError(f"unknown config key {k!r}")
            kw[k] = _coerce(k, getattr(self, k), v) if isinstance(v, str) else v
        try:
            return replace(self, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        updates = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            updates[k] = v
        return cls().with_updates(updates)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _coerce(key: str, default, text: str):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(x) for x in text.split(",") if x.strip())
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


__all__ = ["RunConfig", "ConfigError"]
