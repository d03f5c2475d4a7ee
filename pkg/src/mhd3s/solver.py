"""
Time integration of the scaled compressible ideal MHD system.

The system is split as

    V_t = (1/eps_a) L_A V + (1/eps_m) L_M V + N(V),

where the constant-coefficient stiff part is propagated exactly, mode by
mode, and ``N`` collects everything else: advection, the Lorentz-force and
induction nonlinearities, and the variable-coefficient remainders of the
stiff terms after dividing each equation by its scalar coefficient.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from . import spectral as sp
from .operators import apply_large, decompose_modes, stiff_symbol_hermitian
from .params import ScaleParams
from .snapshot import write_snapshot
from .state import B1, B3, FIELD_NAMES, R, U1, U2, U3, State

log = logging.getLogger(__name__)

INTEGRATORS = ("exp-strang", "lawson-rk4", "rk4-explicit")


class BlowUpError(RuntimeError):
    """Numerical failure: loss of positivity of 1 + eps_m r or runaway norms."""

    def __init__(self, message: str, time: float | None = None, extrema: dict | None = None):
        super().__init__(message)
        self.time = time
        self.extrema = extrema or {}


@dataclass(frozen=True)
class PressureLaw:
    """p(ρ) = ρ^γ / γ, so p'(1) = 1."""

    gamma: float = 5.0 / 3.0

    def pressure(self, rho):
        return np.asarray(rho) ** self.gamma / self.gamma

    def dpressure(self, rho):
        return np.asarray(rho) ** (self.gamma - 1.0)

    def a(self, s):
        """a(s) = p'(1+s) / (1+s) = (1+s)^(γ-2)."""
        return (1.0 + np.asarray(s)) ** (self.gamma - 2.0)

    @staticmethod
    def rho(s):
        return 1.0 + np.asarray(s)


@dataclass(frozen=True)
class SolverConfig:
    """Integrator choice and time-step policy.

    The step is dt = min(cfl Δx / (max|u| + 1), stiff_factor eps_m) for the
    exponential integrators, optionally capped by fast_factor eps_a; the
    explicit integrator is further limited by the largest stiff frequency.
    A positive ``dt`` overrides the policy.
    """

    integrator: str = "exp-strang"
    cfl: float = 0.4
    stiff_factor: float = 0.5
    fast_factor: float = 0.0
    dt: float = 0.0
    t_end: float = 0.5
    dealias: bool = True
    n_samples: int = 20
    snapshot_every: int = 0
    blowup_norm: float = 1e6

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}; choose from {INTEGRATORS}")
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt < 0:
            raise ValueError(f"dt must be nonnegative, got {self.dt}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


# ---------------------------------------------------------------------------
# Right-hand sides


def _check_positivity(r_phys: np.ndarray, params: ScaleParams, t: float | None = None) -> None:
    rmin = float(r_phys.min())
    if not np.isfinite(rmin) or 1.0 + params.eps_m * rmin <= 0.0:
        raise BlowUpError(
            f"density lost positivity: 1 + eps_m min(r) = {1.0 + params.eps_m * rmin:.3e}",
            time=t,
            extrema={"r_min": rmin, "r_max": float(r_phys.max())},
        )


def nonstiff_rhs(state: State, params: ScaleParams, dealias: bool = True, t: float | None = None) -> State:
    """dV/dt minus (1/eps_a) L_A V + (1/eps_m) L_M V.

    Raises:
        BlowUpError: if 1 + eps_m r <= 0 somewhere.
    """
    g = state.grid
    h = state.hat
    ik = (1j * g.kx, 1j * g.ky, 1j * g.kz)
    stack = np.empty((28,) + g.spectral_shape, dtype=complex)
    stack[:7] = h
    for a in range(3):
        stack[7 + a] = ik[a] * h[R]
    for i in range(3):
        for a in range(3):
            stack[10 + 3 * i + a] = ik[a] * h[U1 + i]
            stack[19 + 3 * i + a] = ik[a] * h[B1 + i]
    phys = sp.inverse(g, stack)
    _check_positivity(phys[R], params, t)
    shape3 = g.shape
    out = kernels.mhd_pointwise(
        phys[:7],
        phys[7:10],
        phys[10:19].reshape((3, 3) + shape3),
        phys[19:28].reshape((3, 3) + shape3),
        params.eps_m,
        params.eps_a,
        params.gamma,
    )
    F = sp.forward(g, out)
    if dealias:
        F *= g.dealias_mask
    tend = np.empty_like(h)
    tend[R] = -(ik[0] * F[0] + ik[1] * F[1] + ik[2] * F[2])
    tend[U1:U3 + 1] = F[3:6]
    # induction in curl form: b_t = ∇×(u×b)
    E = F[6:9]
    tend[B1] = ik[1] * E[2] - ik[2] * E[1]
    tend[B1 + 1] = ik[2] * E[0] - ik[0] * E[2]
    tend[B3] = ik[0] * E[1] - ik[1] * E[0]
    return State(g, tend)


def full_rhs(state: State, params: ScaleParams, dealias: bool = True, t: float | None = None) -> State:
    return nonstiff_rhs(state, params, dealias, t) + apply_large(state, params)


# ---------------------------------------------------------------------------
# Exact stiff propagator


class StiffPropagator:
    """Per-mode exponential of the constant-coefficient stiff operator.

    On each stored mode the operator (1/eps_a) L_A + (1/eps_m) L_M has symbol
    -iH with H real symmetric, so exp(τ·symbol) = U exp(-iτΛ) Uᵀ.
    """

    def __init__(self, grid: sp.Grid, params: ScaleParams):
        self.grid = grid
        self.params = params
        H = stiff_symbol_hermitian(grid, params)
        lam, U = np.linalg.eigh(H)
        self.lam = np.ascontiguousarray(lam)
        self.U = np.ascontiguousarray(U)
        self.max_frequency = float(np.max(np.abs(lam))) if lam.size else 0.0

    def apply_hat(self, hat: np.ndarray, tau: float) -> np.ndarray:
        nmodes = self.lam.shape[0]
        v = hat.reshape(7, nmodes)
        out = kernels.mode_propagate(self.U, self.lam, v, float(tau))
        return np.asarray(out).reshape(hat.shape)

    def __call__(self, state: State, tau: float) -> State:
        return State(state.grid, self.apply_hat(state.hat, tau))


_PROPAGATORS: dict = {}


def get_propagator(grid: sp.Grid, params: ScaleParams) -> StiffPropagator:
    key = (grid, params.eps_m, params.eps_a)
    prop = _PROPAGATORS.get(key)
    if prop is None:
        if len(_PROPAGATORS) > 8:
            _PROPAGATORS.clear()
        prop = _PROPAGATORS[key] = StiffPropagator(grid, params)
    return prop


def stiff_propagator(state: State, dt: float, params: ScaleParams) -> State:
    """exp(dt ((1/eps_a) L_A + (1/eps_m) L_M)) applied exactly per Fourier mode."""
    return get_propagator(state.grid, params)(state, dt)


# ---------------------------------------------------------------------------
# Stepping


def _fast_integrands(state: State, mu: float) -> np.ndarray:
    """Integrands of the time-integrated fast variables on the kz = 0 plane.

    Rows: ⟨u_h^F⟩_z (two components) and ⟨b3^F + μ Δ⁻¹Δ_h r^S⟩_z.
    """
    g = state.grid
    h0 = state.hat[..., :1]
    uh = h0[U1:U2 + 1]
    kx, ky = g.kx, g.ky
    inv_kh2 = g.inv_kh2[..., :1]
    # ⟨u_h^F⟩_z = ⟨u_h⟩_z - P_h^div ⟨u_h⟩_z = gradient part
    proj = (kx * uh[0] + ky * uh[1]) * inv_kh2
    out = np.zeros((3,) + h0.shape[1:], dtype=complex)
    out[0] = kx * proj
    out[1] = ky * proj
    # on z-independent fields Δ⁻¹Δ_h is the identity away from the mean
    b3 = h0[B3].copy()
    r = h0[R].copy()
    b3[0, 0, 0] = 0.0
    r[0, 0, 0] = 0.0
    out[2] = b3 + mu * r
    return out


class _Stepper:
    def __init__(self, grid: sp.Grid, params: ScaleParams, config: SolverConfig):
        self.grid = grid
        self.params = params
        self.config = config
        self.prop = get_propagator(grid, params) if config.integrator != "rk4-explicit" else None
        self._prop_for_dt = None

    def N(self, V: np.ndarray, t=None) -> np.ndarray:
        return nonstiff_rhs(State(self.grid, V), self.params, self.config.dealias, t).hat

    def F(self, V: np.ndarray, t=None) -> np.ndarray:
        return full_rhs(State(self.grid, V), self.params, self.config.dealias, t).hat

    def E(self, V: np.ndarray, tau: float) -> np.ndarray:
        return self.prop.apply_hat(V, tau)

    def finish(self, V: np.ndarray) -> np.ndarray:
        g = self.grid
        V = V.copy()
        V[B1:] = sp.leray(g, V[B1:])
        if self.config.dealias:
            V *= g.dealias_mask
        return V

    def g(self, V: np.ndarray) -> np.ndarray:
        return _fast_integrands(State(self.grid, V), self.params.mu)

    def advance(self, V: np.ndarray, dt: float, t: float):
        """One step; returns the new state and the step's quadrature of ``g``."""
        kind = self.config.integrator
        if kind == "exp-strang":
            V1 = self._rk4_nonstiff(V, 0.5 * dt, t)
            V1 = self.E(V1, dt)
            V1 = self._rk4_nonstiff(V1, 0.5 * dt, t + 0.5 * dt)
            V1 = self.finish(V1)
            quad = 0.5 * dt * (self.g(V) + self.g(V1))
            return V1, quad
        if kind == "lawson-rk4":
            h = dt
            a = self.E(V, 0.5 * h)
            k1 = self.N(V, t)
            b = self.E(k1, 0.5 * h)
            V2 = a + 0.5 * h * b
            k2 = self.N(V2, t + 0.5 * h)
            V3 = a + 0.5 * h * k2
            k3 = self.N(V3, t + 0.5 * h)
            V4 = self.E(a + h * k3, 0.5 * h)
            k4 = self.N(V4, t + h)
            V1 = self.E(a + (h / 6.0) * b + (h / 3.0) * (k2 + k3), 0.5 * h) + (h / 6.0) * k4
            quad = (h / 6.0) * (self.g(V) + 2.0 * self.g(V2) + 2.0 * self.g(V3) + self.g(V4))
            return self.finish(V1), quad
        # classical RK4 on the full right-hand side
        h = dt
        k1 = self.F(V, t)
        V2 = V + 0.5 * h * k1
        k2 = self.F(V2, t + 0.5 * h)
        V3 = V + 0.5 * h * k2
        k3 = self.F(V3, t + 0.5 * h)
        V4 = V + h * k3
        k4 = self.F(V4, t + h)
        V1 = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        quad = (h / 6.0) * (self.g(V) + 2.0 * self.g(V2) + 2.0 * self.g(V3) + self.g(V4))
        return self.finish(V1), quad

    def _rk4_nonstiff(self, V, h, t):
        k1 = self.N(V, t)
        k2 = self.N(V + 0.5 * h * k1, t + 0.5 * h)
        k3 = self.N(V + 0.5 * h * k2, t + 0.5 * h)
        k4 = self.N(V + h * k3, t + h)
        return V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: State, dt: float, config: SolverConfig, params: ScaleParams, t: float = 0.0) -> State:
    """Advance one step of size ``dt`` with the configured integrator."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    stepper = _Stepper(state.grid, params, config)
    V1, _ = stepper.advance(state.hat, dt, t)
    return State(state.grid, V1)


def policy_dt(state: State, params: ScaleParams, config: SolverConfig) -> float:
    """Largest step allowed by the configured policy at ``state``."""
    if config.dt > 0:
        return config.dt
    g = state.grid
    dx = 2.0 * math.pi / max(g.nx, g.ny, g.nz)
    umax = float(np.max(np.abs(sp.inverse(g, state.u)))) if state.u.size else 0.0
    dt = config.cfl * dx / (umax + 1.0)
    if config.integrator == "rk4-explicit":
        wmax = get_propagator(g, params).max_frequency
        if wmax > 0:
            dt = min(dt, 2.0 / wmax)
    else:
        dt = min(dt, config.stiff_factor * params.eps_m)
    if config.fast_factor > 0:
        dt = min(dt, config.fast_factor * params.eps_a)
    return dt


# ---------------------------------------------------------------------------
# Diagnostics and runs


@dataclass
class RunResult:
    """Trajectory samples, diagnostics rows and the time-integrated fast variables."""

    times: list[float]
    states: list[State]
    diagnostics: list[dict]
    A_u: list[np.ndarray]
    A_b: list[np.ndarray]
    status: str = "completed"
    message: str = ""
    steps: int = 0
    wall_time: float = 0.0
    extrema: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def diagnose(state: State, params: ScaleParams, config: SolverConfig, t: float,
             A_u: np.ndarray | None = None, A_b: np.ndarray | None = None) -> dict:
    """Monitored norms at one time."""
    g = state.grid
    n = params.n
    vt = full_rhs(state, params, config.dealias, t)
    large = apply_large(state, params)
    row = {
        "t": t,
        "norm_0": state.norm(0),
        "norm_n": state.norm(n),
    }
    for j in range(n):
        row[f"vt_{j}"] = vt.norm(j)
        row[f"mu_j_vt_{j}"] = params.mu**j * vt.norm(j)
    row["large_nm1"] = large.norm(n - 1)
    row["divb_0"] = sp.sobolev_norm(g, state.div_b())
    row["mean_r"] = float(state.hat[R, 0, 0, 0].real)
    row["mean_b3"] = float(state.hat[B3, 0, 0, 0].real)
    h2 = g.horizontal()
    if A_u is not None:
        a_u = sp.sobolev_norm(h2, A_u, n)
        row["A_u_n"] = a_u
        row["A_u_n_scaled"] = a_u / params.eps_m ** (1.0 + params.nu)
    if A_b is not None:
        a_b = sp.sobolev_norm(h2, A_b, n)
        row["A_b_n"] = a_b
        row["A_b_n_scaled"] = a_b / params.eps_m ** (1.0 + params.nu)
    res = conservation_residuals(state, params, config.dealias, vt)
    row.update(res)
    return row


def conservation_residuals(state: State, params: ScaleParams, dealias: bool = True,
                           vt: State | None = None) -> dict:
    """Residuals of the vertically averaged density law and its large-term-free combination.

    With V_t taken from the model's right-hand side:
      res_r   = ∂_t⟨r⟩_z + ⟨∇_h·(r u_h)⟩_z + (1/eps_m)⟨∇_h·u_h⟩_z
      res_rb3 = ∂_t⟨r-μb3⟩_z + ⟨∇_h·((r-μb3)u_h)⟩_z + μ⟨∇_h·(u3 b_h)⟩_z
    """
    g = state.grid
    if vt is None:
        vt = full_rhs(state, params, dealias)
    mu = params.mu
    phys = sp.inverse(g, state.hat[[R, U1, U2, U3, B1, B1 + 1, B3]])
    r, u1, u2, u3, b1, b2, b3 = phys
    ikx, iky = 1j * g.kx, 1j * g.ky

    def hdiv(fx, fy):
        F = sp.forward(g, np.stack([fx, fy]))
        if dealias:
            F *= g.dealias_mask
        return ikx * F[0] + iky * F[1]

    az = lambda f: f[..., :1]  # noqa: E731
    res_r = az(vt.hat[R]) + az(hdiv(r * u1, r * u2)) + az(ikx * state.hat[U1] + iky * state.hat[U2]) / params.eps_m
    q = r - mu * b3
    res_b = (
        az(vt.hat[R] - mu * vt.hat[B3])
        + az(hdiv(q * u1, q * u2))
        + mu * az(hdiv(u3 * b1, u3 * b2))
    )
    h2 = g.horizontal()
    return {
        "res_rforlim": sp.sobolev_norm(h2, res_r),
        "res_azmub3": sp.sobolev_norm(h2, res_b),
    }


def run(
    init: State,
    params: ScaleParams,
    config: SolverConfig,
    out_dir: str | Path | None = None,
    keep_states: bool = True,
) -> RunResult:
    """Integrate from ``init`` to ``config.t_end``, sampling ``n_samples`` equal intervals.

    Blow-up is reported through ``status``/``message`` with the partial
    trajectory rather than raised.
    """
    g = init.grid
    V = init.hat.copy()
    V[B1:] = sp.leray(g, V[B1:])
    if config.dealias:
        V *= g.dealias_mask
    stepper = _Stepper(g, params, config)
    times = list(np.linspace(0.0, config.t_end, config.n_samples + 1))
    A = np.zeros((3,) + g.horizontal().spectral_shape, dtype=complex)
    result = RunResult(times=[], states=[], diagnostics=[], A_u=[], A_b=[])
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    started = _time.perf_counter()

    def record(k: int, t: float, V: np.ndarray, dt_used: float, nsteps: int):
        s = State(g, V.copy())
        row = diagnose(s, params, config, t, A[:2], A[2])
        row["dt"] = dt_used
        row["steps"] = nsteps
        result.times.append(t)
        result.diagnostics.append(row)
        result.A_u.append(A[:2].copy())
        result.A_b.append(A[2].copy())
        if keep_states:
            result.states.append(s)
        if out is not None and config.snapshot_every > 0 and k % config.snapshot_every == 0:
            phys = s.physical()
            write_snapshot(out / f"snap_{k:04d}.bin", dict(zip(FIELD_NAMES, phys)))
        if not np.isfinite(row["norm_n"]) or row["norm_n"] > config.blowup_norm:
            raise BlowUpError(f"‖V‖_n = {row['norm_n']:.3e} exceeds guard", time=t)

    t = 0.0
    total_steps = 0
    try:
        record(0, 0.0, V, 0.0, 0)
        for k in range(1, len(times)):
            span = times[k] - times[k - 1]
            dt_max = policy_dt(State(g, V), params, config)
            nsteps = max(1, int(math.ceil(span / dt_max - 1e-9)))
            dt = span / nsteps
            for _ in range(nsteps):
                V, quad = stepper.advance(V, dt, t)
                A += quad
                t += dt
                total_steps += 1
            t = times[k]
            record(k, t, V, dt, total_steps)
    except BlowUpError as exc:
        result.status = "blowup"
        result.message = str(exc)
        result.extrema = {"time": exc.time if exc.time is not None else t, **exc.extrema}
        log.warning("run aborted at t=%.4g: %s", t, exc)
    result.steps = total_steps
    result.wall_time = _time.perf_counter() - started
    if out is not None:
        write_diagnostics_csv(out / "diagnostics.csv", result.diagnostics)
    return result


def write_diagnostics_csv(path, rows: list[dict]) -> None:
    import csv

    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in rows:
            w.writerow([repr(float(row[k])) if isinstance(row[k], (float, np.floating)) else row[k] for k in keys])


def energy_ratio(result: RunResult) -> float:
    """max_t ‖V(t)‖_0 / ‖V(0)‖_0 over the recorded samples."""
    norms = [row["norm_0"] for row in result.diagnostics]
    if not norms or norms[0] == 0:
        return 1.0
    return max(norms) / norms[0]


def config_dict(config: SolverConfig) -> dict:
    return asdict(config)


def with_overrides(config: SolverConfig, **kw) -> SolverConfig:
    return replace(config, **kw)


def mode_split_norms(state: State, j: int) -> dict:
    """Norms of the fast, intermediate and slow parts (monitoring helper)."""
    m = decompose_modes(state, div_tol=np.inf)
    return {
        "fast": m.fast.norm(j),
        "intermediate": m.intermediate.norm(j),
        "slow": m.slow.norm(j),
    }
