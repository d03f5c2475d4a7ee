"""
Convergence-rate experiments: error functionals, ε sweeps, slope fits and verdicts.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectral as sp
from .initdata import InitSpec, Pieces, assemble, make_pieces
from .limit import (
    LB1,
    LB2,
    LR,
    LU1,
    LU2,
    LU3,
    CorrectorState,
    LimitConfig,
    LimitState,
    run_limit,
)
from .operators import decompose_modes
from .params import ScaleParams
from .solver import SolverConfig, energy_ratio, run
from .state import B1, B2, B3, R, U1, U2, U3, State

log = logging.getLogger(__name__)

METRICS = ("E_fast", "E_int", "E_slowH", "E_slowV", "E_slowV_cor")


@dataclass
class ErrorMetrics:
    """Error functionals at one time. ``e_fast`` and ``e_int`` are indexed by Sobolev order j."""

    t: float
    e_fast: list[float]
    e_int: list[float]
    e_slowH: float
    e_slowV: float
    e_slowV_cor: float

    def items(self):
        """(metric name, j, value) triples; scalar metrics report j = n-2."""
        n = len(self.e_fast)
        for j, v in enumerate(self.e_fast):
            yield "E_fast", j, v
        for j, v in enumerate(self.e_int):
            yield "E_int", j, v
        yield "E_slowH", n - 2, self.e_slowH
        yield "E_slowV", n - 2, self.e_slowV
        yield "E_slowV_cor", n - 2, self.e_slowV_cor


def _check_grids(full: State, L: LimitState) -> None:
    g = full.grid
    if L.grid != g.horizontal():
        raise ValueError(f"limit grid {L.grid.shape} does not match horizontal grid of {g.shape}")


def error_metrics(full: State, L: LimitState, C: CorrectorState | None, params: ScaleParams, t: float = 0.0) -> ErrorMetrics:
    """All error functionals from co-temporal full, limit and corrector states."""
    _check_grids(full, L)
    g = full.grid
    h2 = L.grid
    n = params.n
    mu, mu_lim = params.mu, params.mu_lim
    modes = decompose_modes(full, div_tol=np.inf)
    F, I = modes.fast.hat, modes.intermediate.hat
    # fast: u_h^F, b_h^F and b3 - ⟨⟨b̄3⁰⟩⟩ + μ(⟨r⟩_z - ⟨⟨r̄⁰⟩⟩)
    b3_term = F[B3].copy()
    b3_term[..., 0] += mu * full.hat[R, ..., 0]
    b3_term[0, 0, 0] += full.hat[B3, 0, 0, 0] - L.mean_b3_0 - mu * L.mean_r_0
    e_fast = [
        sp.sobolev_norm(g, F[U1:U2 + 1], j) + sp.sobolev_norm(g, F[B1:B2 + 1], j) + sp.sobolev_norm(g, b3_term, j)
        for j in range(n)
    ]
    e_int = [sp.sobolev_norm(g, I[R], j) + sp.sobolev_norm(g, I[U3], j) for j in range(n)]
    S = modes.slow.hat[..., :1]
    Lh = L.hat
    js = n - 2
    e_slowH = sp.sobolev_norm(h2, S[U1:U2 + 1] - Lh[LU1:LU2 + 1], js) + sp.sobolev_norm(
        h2, S[B1:B2 + 1] - Lh[LB1:LB2 + 1], js
    )
    r_avg = full.hat[R, ..., :1]
    u3_avg = full.hat[U3, ..., :1]
    e_slowV = sp.sobolev_norm(h2, r_avg - Lh[LR], js) + sp.sobolev_norm(h2, u3_avg - Lh[LU3], js)
    if C is None:
        e_cor = float("nan")
    else:
        d = mu - mu_lim
        e_cor = sp.sobolev_norm(h2, r_avg - (Lh[LR] + d / (1.0 + mu**2) * C.hat[0]), js) + sp.sobolev_norm(
            h2, u3_avg - (Lh[LU3] + d * C.hat[1]), js
        )
    return ErrorMetrics(t, e_fast, e_int, e_slowH, e_slowV, e_cor)


# ---------------------------------------------------------------------------
# Predictions


@dataclass(frozen=True)
class RatePrediction:
    """Predicted power of ε_M for each metric."""

    nu: float
    n: int = 3
    mu_lim: float = 0.0

    def exponent(self, metric: str, j: int | None = None) -> float:
        nu, n = self.nu, self.n
        if metric == "E_fast":
            return 1.0 - (j - 1) * nu
        if metric == "E_int":
            return 1.0 if j == 0 else 1.0 - (j - 1) * nu
        if metric == "E_slowH":
            return 1.0
        if metric == "E_slowV":
            base = 1.0 - max(n - 5, 0) * nu
            return min(base, nu) if self.mu_lim == 0.0 else base
        if metric == "E_slowV_cor":
            return 1.0 - max(n - 5, 0) * nu
        raise ValueError(f"unknown metric {metric!r}")

    def table(self) -> dict:
        out = {}
        for j in range(self.n):
            out[f"E_fast({j})"] = self.exponent("E_fast", j)
            out[f"E_int({j})"] = self.exponent("E_int", j)
        for m in ("E_slowH", "E_slowV", "E_slowV_cor"):
            out[m] = self.exponent(m)
        return out


# ---------------------------------------------------------------------------
# Slope fitting


def fit_slope(points, min_points: int = 2) -> tuple[float, float, float]:
    """Least-squares line through (ln ε, ln value); returns (slope, intercept, R²).

    Raises:
        ValueError: on fewer than ``min_points`` points or a nonpositive entry.
    """
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < max(min_points, 2):
        raise ValueError(f"need at least {max(min_points, 2)} points, got {len(pts)}")
    if any(e <= 0 or v <= 0 or not math.isfinite(v) for e, v in pts):
        raise ValueError("fit_slope needs positive, finite ε and values")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    if np.ptp(x) == 0:
        raise ValueError("all ε values coincide")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# Sweeps


@dataclass
class SweepConfig:
    """Settings shared by every point of a sweep."""

    nu: float = 0.5
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    grid: tuple[int, int, int] = (32, 32, 32)
    mu_lim: float = 0.0
    gamma: float = 5.0 / 3.0
    n: int = 3
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(integrator="lawson-rk4", fast_factor=0.25))
    limit_cfl: float = 0.4
    init: InitSpec = field(default_factory=InitSpec)


@dataclass
class RateRow:
    eps_m: float
    nu: float
    metric: str
    j: int
    t: float
    value: float


@dataclass
class RateTable:
    """Metric samples for every sweep point; blown-up points are listed in ``failures``."""

    rows: list[RateRow] = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    monitors: dict = field(default_factory=dict)

    def eps_values(self) -> list[float]:
        return sorted({r.eps_m for r in self.rows}, reverse=True)

    def keys(self) -> list[tuple[str, int]]:
        seen = []
        for r in self.rows:
            if (r.metric, r.j) not in seen:
                seen.append((r.metric, r.j))
        return seen

    def series(self, metric: str, j: int, mode: str = "sup") -> list[tuple[float, float]]:
        """(ε_M, value) pairs using the sup over time or the final-time value."""
        out = []
        for e in self.eps_values():
            rs = [r for r in self.rows if r.eps_m == e and r.metric == metric and r.j == j]
            if not rs:
                continue
            if mode == "sup":
                out.append((e, max(r.value for r in rs)))
            elif mode == "final":
                out.append((e, max(rs, key=lambda r: r.t).value))
            else:
                raise ValueError(f"mode must be 'sup' or 'final', got {mode!r}")
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsM", "nu", "metric", "j", "t", "value"])
            for r in self.rows:
                w.writerow([repr(float(r.eps_m)), repr(float(r.nu)), r.metric, r.j, repr(float(r.t)), repr(float(r.value))])

    @classmethod
    def from_csv(cls, path) -> "RateTable":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(RateRow(float(rec["epsM"]), float(rec["nu"]), rec["metric"], int(rec["j"]),
                                    float(rec["t"]), float(rec["value"])))
        return cls(rows)

    def to_json(self, path) -> None:
        doc = {
            "rows": [asdict(r) for r in self.rows],
            "failures": self.failures,
            "monitors": self.monitors,
            "sup": {f"{m}({j})": self.series(m, j, "sup") for m, j in self.keys()},
            "final": {f"{m}({j})": self.series(m, j, "final") for m, j in self.keys()},
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def limit_initial(pieces: Pieces) -> LimitState:
    """Limit data from the slow pieces (identical for every ε)."""
    g2 = pieces.grid.horizontal()
    hat = np.zeros((6,) + g2.spectral_shape, dtype=complex)
    hat[LR] = pieces.r_S[..., :1]
    hat[LU1:LU2 + 1] = pieces.uh_S[..., :1]
    hat[LU3] = pieces.u3_S[..., :1]
    hat[LB1:LB2 + 1] = pieces.bh_S[..., :1]
    return LimitState(g2, hat, pieces.mean_b3, float(pieces.r_S[0, 0, 0].real))


def run_point(eps_m: float, cfg: SweepConfig, pieces: Pieces | None = None, out_dir=None) -> dict:
    """Full, limit and corrector runs at one ε_M; returns metrics per sample time and monitors."""
    params = ScaleParams.from_nu(eps_m, cfg.nu, mu_lim=cfg.mu_lim, gamma=cfg.gamma, n=cfg.n)
    grid = sp.Grid(*cfg.grid)
    if pieces is None:
        pieces = make_pieces(cfg.init, grid)
    V0 = assemble(pieces, params)
    res = run(V0, params, cfg.solver, out_dir=out_dir)
    L0 = limit_initial(pieces)
    lcfg = LimitConfig(t_end=cfg.solver.t_end, cfl=cfg.limit_cfl, n_samples=cfg.solver.n_samples,
                       dealias=cfg.solver.dealias)
    traj = run_limit(L0, cfg.mu_lim, lcfg, corrector_mu=params.mu)
    metrics = [
        error_metrics(s, L, C, params, t)
        for s, L, C, t in zip(res.states, traj.states, traj.correctors, res.times)
    ]
    diag = res.diagnostics
    monitors = {
        "status": res.status,
        "message": res.message,
        "steps": res.steps,
        "wall_time": res.wall_time,
        "in_scaling_region": params.in_scaling_region,
        "energy_ratio": energy_ratio(res) if diag else float("nan"),
        "max_mu_j_vt": {j: max(d[f"mu_j_vt_{j}"] for d in diag) for j in range(cfg.n)} if diag else {},
        "max_A_u_scaled": max(d["A_u_n_scaled"] for d in diag) if diag else float("nan"),
        "max_divb": max(d["divb_0"] for d in diag) if diag else float("nan"),
        "mean_r_drift": max(abs(d["mean_r"] - diag[0]["mean_r"]) for d in diag) if diag else float("nan"),
        "mean_b3_drift": max(abs(d["mean_b3"] - diag[0]["mean_b3"]) for d in diag) if diag else float("nan"),
        "max_res_rforlim": max(d["res_rforlim"] for d in diag) if diag else float("nan"),
        "max_res_azmub3": max(d["res_azmub3"] for d in diag) if diag else float("nan"),
    }
    return {"params": params, "metrics": metrics, "monitors": monitors, "completed": res.completed}


def sweep(cfg: SweepConfig, out_dir=None, jobs: int = 1) -> RateTable:
    """Run every ε_M in ``cfg.eps_list``; blown-up points are recorded and skipped."""
    for e in cfg.eps_list:
        if not 0.0 < e < 1.0:
            raise ValueError(f"every ε_M must lie in (0, 1), got {e}")
    grid = sp.Grid(*cfg.grid)
    pieces = make_pieces(cfg.init, grid)
    out = Path(out_dir) if out_dir is not None else None

    def job(e):
        sub = out / f"eps_{e:g}" if out is not None else None
        return e, run_point(e, cfg, pieces, sub)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(job, cfg.eps_list))
    else:
        results = [job(e) for e in cfg.eps_list]

    table = RateTable()
    for e, r in results:
        mon = r["monitors"]
        table.monitors[repr(e)] = mon
        if not r["completed"]:
            table.failures[repr(e)] = mon["message"]
            log.warning("sweep point eps_m=%g failed: %s", e, mon["message"])
            continue
        for m in r["metrics"]:
            for name, j, v in m.items():
                table.rows.append(RateRow(float(e), float(cfg.nu), name, j, float(m.t), float(v)))
    return table


# ---------------------------------------------------------------------------
# Report


DEFAULT_CHECKS = (
    ("E_fast", 0, 0.3),
    ("E_int", 1, 0.3),
    ("E_slowH", None, 0.3),
    ("E_slowV", None, 0.2),
    ("E_slowV_cor", None, 0.3),
)


def report(
    table: RateTable,
    predictions: RatePrediction,
    checks=DEFAULT_CHECKS,
    mode: str = "sup",
    floor: float = 1e-12,
) -> dict:
    """Fit each checked metric and compare with its predicted exponent.

    A metric whose values all lie below ``floor`` is marked ``floor-limited``
    instead of pass/fail.
    """
    n = predictions.n
    verdicts = []
    for metric, j, tol in checks:
        jj = n - 2 if j is None else j
        label = metric if j is None else f"{metric}({j})"
        pred = predictions.exponent(metric, jj)
        pts = table.series(metric, jj, mode)
        entry = {"metric": label, "predicted": pred, "tolerance": tol, "points": pts}
        if len(pts) < 2:
            entry.update(status="insufficient", slope=None, r2=None, diff=None)
        elif all(v <= floor for _, v in pts):
            entry.update(status="floor-limited", slope=None, r2=None, diff=None)
        else:
            try:
                slope, _, r2 = fit_slope(pts)
            except ValueError as exc:
                entry.update(status="fail", slope=None, r2=None, diff=None, error=str(exc))
            else:
                diff = abs(slope - pred)
                entry.update(slope=slope, r2=r2, diff=diff, status="pass" if diff <= tol else "fail")
        verdicts.append(entry)
    by = {v["metric"]: v for v in verdicts}
    corrector = None
    if "E_slowV" in by and "E_slowV_cor" in by:
        corrector = {
            "uncorrected_slope": by["E_slowV"].get("slope"),
            "corrected_slope": by["E_slowV_cor"].get("slope"),
            "uncorrected_predicted": by["E_slowV"]["predicted"],
            "corrected_predicted": by["E_slowV_cor"]["predicted"],
        }
        if predictions.mu_lim != 0.0:
            corrector["note"] = "mu_lim > 0: the |mu - mu_lim| term is not a power of eps_m; exponent-1 family only"
    ok = all(v["status"] in ("pass", "floor-limited") for v in verdicts)
    return {
        "mode": mode,
        "nu": predictions.nu,
        "n": predictions.n,
        "verdicts": verdicts,
        "corrector": corrector,
        "failures": table.failures,
        "passed": ok,
    }


def report_text(doc: dict) -> str:
    lines = [f"{'metric':<14}{'slope':>9}{'predicted':>11}{'diff':>8}{'tol':>6}  status"]
    for v in doc["verdicts"]:
        s = "-" if v["slope"] is None else f"{v['slope']:.3f}"
        d = "-" if v["diff"] is None else f"{v['diff']:.3f}"
        lines.append(f"{v['metric']:<14}{s:>9}{v['predicted']:>11.3f}{d:>8}{v['tolerance']:>6.2f}  {v['status']}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Product-estimate diagnostic


def product_ratio(grid: sp.Grid, f: np.ndarray, g_: np.ndarray, j: int) -> float:
    """‖⟨fg⟩_z‖_{H^{j-1}(T²)} / (‖f‖_j ‖g‖_0 + ‖f‖_0 ‖g‖_j) for spectral f, g on a 3D grid."""
    if j < 1:
        raise ValueError("j must be at least 1")
    prod = sp.forward(grid, sp.inverse(grid, f) * sp.inverse(grid, g_))
    avg = prod[..., :1]
    num = sp.sobolev_norm(grid.horizontal(), avg, j - 1)
    den = sp.sobolev_norm(grid, f, j) * sp.sobolev_norm(grid, g_) + sp.sobolev_norm(grid, f) * sp.sobolev_norm(grid, g_, j)
    return num / den


def product_ratio_statistic(grid: sp.Grid, n: int = 3, pairs: int = 100, seed: int = 0, kmax: float | None = None) -> dict:
    """Empirical max of :func:`product_ratio` over random smooth pairs, per j = 1..n.

    The pairs are drawn on a fixed lattice holding |k| <= kmax, so every grid
    fine enough to resolve their product sees the same ensemble.
    """
    rng = np.random.default_rng(seed)
    kcut = kmax if kmax is not None else 4.0
    m = 2 * (int(np.floor(kcut)) + 1)
    ref = sp.Grid(m, m, m)
    k = np.sqrt(np.broadcast_to(ref.k2, ref.spectral_shape))
    env = (k <= kcut) * (1.0 + k**2) ** -1.0
    fs = []
    for _ in range(pairs):
        pair = []
        for _ in range(2):
            c = rng.standard_normal(ref.spectral_shape) + 1j * rng.standard_normal(ref.spectral_shape)
            pair.append(sp.resample(ref, sp.enforce_hermitian(ref, c * env), grid))
        fs.append(pair)
    return {j: max(product_ratio(grid, f, g_, j) for f, g_ in fs) for j in range(1, n + 1)}
