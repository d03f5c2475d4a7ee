"""
The z-independent limit system on the two-torus and its linear corrector.

Limit unknowns (2D fields): r̄, ū_h, ū3, b̄_h. The vertical field b̄3 is not
evolved; it is recovered from r̄ and the two initial means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp

# component indices inside LimitState.hat
LR, LU1, LU2, LU3, LB1, LB2 = range(6)
LIMIT_NAMES = ("r", "u1", "u2", "u3", "b1", "b2")


@dataclass(frozen=True)
class LimitState:
    """Spectral limit fields on a horizontal grid plus the two conserved means.

    Attributes:
        grid: horizontal grid (``nz == 1``)
        hat: shape ``(6, nx, ny, 1)``: r̄, ū1, ū2, ū3, b̄1, b̄2
        mean_b3_0: ⟨⟨b̄3⁰⟩⟩
        mean_r_0: ⟨⟨r̄⁰⟩⟩
    """

    grid: sp.Grid
    hat: np.ndarray
    mean_b3_0: float = 0.0
    mean_r_0: float = 0.0

    def __post_init__(self):
        if not self.grid.is_2d:
            raise ValueError("limit fields live on a horizontal grid (nz == 1)")
        if self.hat.shape != (6,) + self.grid.spectral_shape:
            raise ValueError(f"limit state shape {self.hat.shape} != {(6,) + self.grid.spectral_shape}")

    @classmethod
    def zeros(cls, grid: sp.Grid) -> "LimitState":
        return cls(grid, np.zeros((6,) + grid.spectral_shape, dtype=complex))

    @classmethod
    def from_physical(cls, grid: sp.Grid, fields: dict, mean_b3_0: float = 0.0) -> "LimitState":
        """Build from a dict of 2D (or (nx, ny, 1)) arrays; ⟨⟨r̄⁰⟩⟩ is read off r̄."""
        hat = np.zeros((6,) + grid.spectral_shape, dtype=complex)
        for i, name in enumerate(LIMIT_NAMES):
            if name in fields:
                f = np.asarray(fields[name], dtype=float).reshape(grid.shape)
                hat[i] = sp.forward(grid, f)
        hat[LU1:LU2 + 1] = sp.leray_h(grid, hat[LU1:LU2 + 1])
        hat[LB1:LB2 + 1] = sp.leray_h(grid, hat[LB1:LB2 + 1])
        return cls(grid, hat, float(mean_b3_0), float(hat[LR, 0, 0, 0].real))

    def with_hat(self, hat: np.ndarray) -> "LimitState":
        return LimitState(self.grid, hat, self.mean_b3_0, self.mean_r_0)

    def b3(self, mu_lim: float) -> np.ndarray:
        """b̄3 = ⟨⟨b̄3⁰⟩⟩ − μ_lim (r̄ − ⟨⟨r̄⁰⟩⟩), spectral."""
        out = -mu_lim * self.hat[LR]
        out = out.copy()
        out[0, 0, 0] = self.mean_b3_0 - mu_lim * (self.hat[LR, 0, 0, 0] - self.mean_r_0)
        return out

    def physical(self) -> np.ndarray:
        return sp.inverse(self.grid, self.hat)

    def norm(self, j: int = 0) -> float:
        return sp.sobolev_norm(self.grid, self.hat, j)


@dataclass(frozen=True)
class CorrectorState:
    """r_c and u3_c on the horizontal grid, shape ``(2, nx, ny, 1)``."""

    grid: sp.Grid
    hat: np.ndarray

    @classmethod
    def zeros(cls, grid: sp.Grid) -> "CorrectorState":
        return cls(grid, np.zeros((2,) + grid.spectral_shape, dtype=complex))


def _products(grid: sp.Grid, phys_pairs: list[np.ndarray], dealias: bool) -> np.ndarray:
    F = sp.forward(grid, np.stack(phys_pairs))
    if dealias:
        F *= grid.dealias_mask
    return F


def _hdiv(grid: sp.Grid, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    return 1j * (grid.kx * fx + grid.ky * fy)


def limit_rhs(L: LimitState, mu_lim: float, dealias: bool = True) -> np.ndarray:
    """Tendency of (r̄, ū_h, ū3, b̄_h); all transport terms in divergence form."""
    g = L.grid
    r, u1, u2, u3, b1, b2 = sp.inverse(g, L.hat)
    F = _products(
        g,
        [
            u1 * r, u2 * r,            # 0,1: ū r̄
            b1 * u3, b2 * u3,          # 2,3: b̄ ū3
            u1 * u1 - b1 * b1,         # 4
            u1 * u2 - b1 * b2,         # 5
            u2 * u2 - b2 * b2,         # 6
            u1 * u3, u2 * u3,          # 7,8: ū ū3
            b1 * r, b2 * r,            # 9,10: b̄ r̄
            u1 * b2 - u2 * b1,         # 11: (ū×b̄)_z
        ],
        dealias,
    )
    ikx, iky = 1j * g.kx, 1j * g.ky
    tend = np.empty_like(L.hat)
    tend[LR] = -_hdiv(g, F[0], F[1]) - (mu_lim / (1.0 + mu_lim**2)) * _hdiv(g, F[2], F[3])
    mom = -np.stack([ikx * F[4] + iky * F[5], ikx * F[5] + iky * F[6]])
    tend[LU1:LU2 + 1] = sp.leray_h(g, mom)
    tend[LU3] = -_hdiv(g, F[7], F[8]) - mu_lim * _hdiv(g, F[9], F[10])
    tend[LB1] = iky * F[11]
    tend[LB2] = -ikx * F[11]
    return tend


def material_r_derivative(L: LimitState, mu_lim: float, dealias: bool = True) -> np.ndarray:
    """(∂_t + ū_h·∇_h) r̄ = −μ_lim (b̄_h·∇_h) ū3 / (1 + μ_lim²), spectral."""
    g = L.grid
    _, _, _, u3, b1, b2 = sp.inverse(g, L.hat)
    F = _products(g, [b1 * u3, b2 * u3], dealias)
    return -(mu_lim / (1.0 + mu_lim**2)) * _hdiv(g, F[0], F[1])


def corrector_rhs(C: CorrectorState, L: LimitState, mu: float, mu_lim: float, dealias: bool = True) -> np.ndarray:
    """Tendency of (r_c, u3_c) driven by the limit solution ``L``."""
    g = L.grid
    if C.grid != g:
        raise ValueError("corrector and limit states live on different grids")
    r, u1, u2, u3, b1, b2 = sp.inverse(g, L.hat)
    rc, u3c = sp.inverse(g, C.hat)
    q = (1.0 + mu**2) * r - mu**2 * L.mean_r_0
    F = _products(
        g,
        [
            u1 * rc, u2 * rc,
            b1 * u3c, b2 * u3c,
            b1 * u3, b2 * u3,
            u1 * u3c, u2 * u3c,
            b1 * rc, b2 * rc,
            b1 * q, b2 * q,
        ],
        dealias,
    )
    b_grad_u3bar = _hdiv(g, F[4], F[5])
    dr_bar = -(mu_lim / (1.0 + mu_lim**2)) * b_grad_u3bar
    tend = np.empty_like(C.hat)
    tend[0] = (
        -_hdiv(g, F[0], F[1])
        - mu * _hdiv(g, F[2], F[3])
        - b_grad_u3bar
        - (mu + mu_lim) * dr_bar
    )
    coef = (1.0 - mu * mu_lim) / ((1.0 + mu**2) * (1.0 + mu_lim**2))
    tend[1] = (
        -_hdiv(g, F[6], F[7])
        - (mu / (1.0 + mu**2)) * _hdiv(g, F[8], F[9])
        - coef * _hdiv(g, F[10], F[11])
    )
    return tend


def limit_energy(L: LimitState, mu_lim: float) -> float:
    """Quadratic invariant ∫|ū_h|² + |b̄_h|² + ū3² + R̃²/(1+μ_lim²), R̃ = (1+μ_lim²)r̄ − μ_lim²⟨⟨r̄⁰⟩⟩.

    Normalized by the torus area (mean over the domain).
    """
    g = L.grid
    h = L.hat
    rt = (1.0 + mu_lim**2) * h[LR]
    rt = rt.copy()
    rt[0, 0, 0] -= mu_lim**2 * L.mean_r_0
    e = sp.inner(g, h[LU1:], h[LU1:])
    e += sp.inner(g, rt, rt) / (1.0 + mu_lim**2)
    return e


def symmetrized_residual(L: LimitState, mu_lim: float, tend: np.ndarray | None = None,
                         dealias: bool = True) -> float:
    """Residual of the symmetric reformulation in (R̃, ū3) given the limit tendency.

    R̃_t + ∇·(ū R̃) + μ_lim ∇·(b̄ ū3) = 0 and ū3_t + ∇·(ū ū3) + μ_lim/(1+μ_lim²) ∇·(b̄ R̃) = 0.
    """
    g = L.grid
    if tend is None:
        tend = limit_rhs(L, mu_lim, dealias)
    r, u1, u2, u3, b1, b2 = sp.inverse(g, L.hat)
    rt = (1.0 + mu_lim**2) * r - mu_lim**2 * L.mean_r_0
    F = _products(g, [u1 * rt, u2 * rt, b1 * u3, b2 * u3, u1 * u3, u2 * u3, b1 * rt, b2 * rt], dealias)
    res1 = (1.0 + mu_lim**2) * tend[LR] + _hdiv(g, F[0], F[1]) + mu_lim * _hdiv(g, F[2], F[3])
    res2 = tend[LU3] + _hdiv(g, F[4], F[5]) + (mu_lim / (1.0 + mu_lim**2)) * _hdiv(g, F[6], F[7])
    return sp.sobolev_norm(g, np.stack([res1, res2]))


@dataclass(frozen=True)
class LimitConfig:
    """RK4 settings for the limit and corrector systems."""

    t_end: float = 0.5
    cfl: float = 0.4
    dt: float = 0.0
    n_samples: int = 20
    dealias: bool = True

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt < 0:
            raise ValueError(f"dt must be nonnegative, got {self.dt}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


@dataclass
class LimitTrajectory:
    times: list[float]
    states: list[LimitState]
    correctors: list[CorrectorState] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    divergence: list[float] = field(default_factory=list)
    steps: int = 0


def _limit_dt(L: LimitState, mu_lim: float, config: LimitConfig) -> float:
    if config.dt > 0:
        return config.dt
    g = L.grid
    dx = 2.0 * math.pi / max(g.nx, g.ny)
    phys = sp.inverse(g, L.hat[[LU1, LU2, LB1, LB2]])
    speed = float(np.max(np.abs(phys))) if phys.size else 0.0
    return config.cfl * dx / (2.0 * speed + 1.0)


def _project(g: sp.Grid, Y: np.ndarray, dealias: bool) -> np.ndarray:
    Y = Y.copy()
    Y[LU1:LU2 + 1] = sp.leray_h(g, Y[LU1:LU2 + 1])
    Y[LB1:LB2 + 1] = sp.leray_h(g, Y[LB1:LB2 + 1])
    if dealias:
        Y[:6] *= g.dealias_mask
    return Y


def run_limit(
    init: LimitState,
    mu_lim: float,
    config: LimitConfig,
    corrector_mu: float | None = None,
) -> LimitTrajectory:
    """Integrate the limit system with RK4 (Leray per stage) and sample the trajectory.

    When ``corrector_mu`` is given, the corrector is co-integrated on the same
    stages from zero initial data.
    """
    if not 0.0 <= mu_lim < 1.0:
        raise ValueError(f"mu_lim must lie in [0, 1), got {mu_lim}")
    g = init.grid
    with_cor = corrector_mu is not None
    ncomp = 8 if with_cor else 6
    Y = np.zeros((ncomp,) + g.spectral_shape, dtype=complex)
    Y[:6] = init.hat
    Y = _project(g, Y, config.dealias)

    def wrap(Y):
        return init.with_hat(Y[:6])

    def rhs(Y):
        L = wrap(Y)
        out = np.empty_like(Y)
        out[:6] = limit_rhs(L, mu_lim, config.dealias)
        if with_cor:
            out[6:] = corrector_rhs(CorrectorState(g, Y[6:]), L, corrector_mu, mu_lim, config.dealias)
        return out

    times = list(np.linspace(0.0, config.t_end, config.n_samples + 1))
    traj = LimitTrajectory(times=[], states=[])

    def record(t, Y):
        L = wrap(Y.copy())
        traj.times.append(t)
        traj.states.append(L)
        traj.energy.append(limit_energy(L, mu_lim))
        div = np.stack([_hdiv(g, Y[LU1], Y[LU2]), _hdiv(g, Y[LB1], Y[LB2])])
        traj.divergence.append(sp.sobolev_norm(g, div))
        if with_cor:
            traj.correctors.append(CorrectorState(g, Y[6:].copy()))

    record(0.0, Y)
    t = 0.0
    for k in range(1, len(times)):
        span = times[k] - times[k - 1]
        nsteps = max(1, int(math.ceil(span / _limit_dt(wrap(Y), mu_lim, config) - 1e-9)))
        h = span / nsteps
        for _ in range(nsteps):
            k1 = rhs(Y)
            k2 = rhs(_project(g, Y + 0.5 * h * k1, config.dealias))
            k3 = rhs(_project(g, Y + 0.5 * h * k2, config.dealias))
            k4 = rhs(_project(g, Y + h * k3, config.dealias))
            Y = _project(g, Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), config.dealias)
            traj.steps += 1
        t = times[k]
        record(t, Y)
    return traj


def limit_from_state(state, mean_b3_0: float | None = None) -> LimitState:
    """Limit initial data from a 3D state: vertical averages, Leray-projected ū_h and b̄_h."""
    from .state import B1, B3, R, U1, U3

    g3 = state.grid
    g2 = g3.horizontal()
    h0 = state.hat[..., :1]
    hat = np.zeros((6,) + g2.spectral_shape, dtype=complex)
    hat[LR] = h0[R]
    hat[LU1:LU2 + 1] = sp.leray_h(g2, h0[U1:U1 + 2])
    hat[LU3] = h0[U3]
    hat[LB1:LB2 + 1] = h0[B1:B1 + 2]
    mb3 = float(state.hat[B3, 0, 0, 0].real) if mean_b3_0 is None else mean_b3_0
    return LimitState(g2, hat, mb3, float(hat[LR, 0, 0, 0].real))
