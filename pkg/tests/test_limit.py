import numpy as np
import pytest

from mhd3s import spectral as sp
from mhd3s.limit import (
    LB1,
    LR,
    LU1,
    LU3,
    CorrectorState,
    LimitConfig,
    LimitState,
    corrector_rhs,
    limit_energy,
    limit_from_state,
    limit_rhs,
    material_r_derivative,
    run_limit,
    symmetrized_residual,
)
from mhd3s.state import State

G64 = sp.Grid.plane(64)


def _xy(n: int):
    x = 2 * np.pi * np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


def _stream_velocity(psi_fn, n: int):
    """Divergence-free (∂_y ψ, −∂_x ψ) from an analytic stream function via numpy.fft."""
    x, y = _xy(n)
    k = np.fft.fftfreq(n, 1.0 / n)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    ph = np.fft.fft2(psi_fn(x, y))
    return np.real(np.fft.ifft2(1j * ky * ph)), np.real(np.fft.ifft2(-1j * kx * ph))


def _random_limit(grid: sp.Grid, rng, kmax=3.0, amp=0.5, mean_b3=0.7, mean_r=0.2) -> LimitState:
    kk = np.sqrt(np.broadcast_to(grid.k2, grid.spectral_shape))
    c = rng.standard_normal((6,) + grid.spectral_shape) + 1j * rng.standard_normal((6,) + grid.spectral_shape)
    hat = sp.enforce_hermitian(grid, c * (kk <= kmax) * (kk > 0))
    phys = sp.inverse(grid, hat)
    phys *= amp / np.max(np.abs(phys))
    phys[LR] += mean_r
    names = ("r", "u1", "u2", "u3", "b1", "b2")
    return LimitState.from_physical(grid, dict(zip(names, phys)), mean_b3_0=mean_b3)


class EulerOracle:
    """Vorticity-stream 2D Euler with passive scalars, numpy.fft, 2/3 dealiasing, RK4."""

    def __init__(self, n: int):
        k = np.fft.fftfreq(n, 1.0 / n)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        k2 = self.kx**2 + self.ky**2
        self.inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
        self.mask = (np.abs(self.kx) < n / 3) & (np.abs(self.ky) < n / 3)

    def velocity(self, wh):
        ph = wh * self.inv  # ψ with -Δψ = ω
        return np.real(np.fft.ifft2(1j * self.ky * ph)), np.real(np.fft.ifft2(-1j * self.kx * ph))

    def advect(self, u, v, fh):
        fx = np.real(np.fft.ifft2(1j * self.kx * fh))
        fy = np.real(np.fft.ifft2(1j * self.ky * fh))
        return -np.fft.fft2(u * fx + v * fy) * self.mask

    def rhs(self, Y):
        u, v = self.velocity(Y[0])
        return np.stack([self.advect(u, v, f) for f in Y])

    def run(self, u, v, scalars, T, nsteps):
        wh = 1j * self.kx * np.fft.fft2(v) - 1j * self.ky * np.fft.fft2(u)
        Y = np.stack([wh] + [np.fft.fft2(s) for s in scalars]) * self.mask
        h = T / nsteps
        for _ in range(nsteps):
            k1 = self.rhs(Y)
            k2 = self.rhs(Y + 0.5 * h * k1)
            k3 = self.rhs(Y + 0.5 * h * k2)
            k4 = self.rhs(Y + h * k3)
            Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        u, v = self.velocity(Y[0])
        return u, v, [np.real(np.fft.ifft2(f)) for f in Y[1:]]


def _h1_rel(grid: sp.Grid, a: np.ndarray, b: np.ndarray) -> float:
    da = sp.forward(grid, a.reshape((-1,) + grid.shape))
    db = sp.forward(grid, b.reshape((-1,) + grid.shape))
    return sp.sobolev_norm(grid, da - db, 1) / sp.sobolev_norm(grid, db, 1)


class TestLimitRHS:
    def test_zero(self):
        assert np.all(limit_rhs(LimitState.zeros(G64), 0.3) == 0)

    def test_mean_tendencies_vanish(self, rng):
        L = _random_limit(sp.Grid.plane(32), rng)
        tend = limit_rhs(L, 0.4)
        assert np.max(np.abs(tend[:, 0, 0, 0])) < 1e-14

    def test_advective_form(self, rng):
        g = sp.Grid.plane(32)
        L = _random_limit(g, rng)
        mu = 0.35
        tend = sp.inverse(g, limit_rhs(L, mu, dealias=False))
        r, u1, u2, u3, b1, b2 = L.physical()
        d = lambda f, a: sp.inverse(g, sp.derivative(g, sp.forward(g, f), a))  # noqa: E731
        adv = lambda f: u1 * d(f, 0) + u2 * d(f, 1)  # noqa: E731
        bdg = lambda f: b1 * d(f, 0) + b2 * d(f, 1)  # noqa: E731
        ref_r = -adv(r) - mu * bdg(u3) / (1 + mu**2)
        ref_u3 = -adv(u3) - mu * bdg(r)
        ref_b1 = -adv(b1) + bdg(u1)
        ref_b2 = -adv(b2) + bdg(u2)
        for got, ref in ((tend[0], ref_r), (tend[3], ref_u3), (tend[4], ref_b1), (tend[5], ref_b2)):
            assert np.max(np.abs(got - ref)) < 1e-10
        # momentum: tendency minus (−u·∇u + b·∇b) is a gradient
        mom = np.stack([-adv(u1) + bdg(b1), -adv(u2) + bdg(b2)])
        proj = sp.inverse(g, sp.leray_h(g, sp.forward(g, mom)))
        assert np.max(np.abs(tend[1:3] - proj)) < 1e-10

    def test_symmetrized_residual(self, rng):
        L = _random_limit(sp.Grid.plane(32), rng)
        for mu in (0.0, 0.3, 0.8):
            assert symmetrized_residual(L, mu) <= 1e-10

    def test_b3_algebraic(self, rng):
        L = _random_limit(sp.Grid.plane(16), rng)
        b3 = L.b3(0.4)
        r = L.hat[LR].copy()
        r[0, 0, 0] -= L.mean_r_0
        expect = -0.4 * r
        expect[0, 0, 0] += L.mean_b3_0
        assert np.allclose(b3, expect, atol=1e-15)


class TestRunLimit:
    def test_zero_init(self):
        tr = run_limit(LimitState.zeros(sp.Grid.plane(16)), 0.2, LimitConfig(t_end=0.1, n_samples=2), corrector_mu=0.3)
        assert all(np.all(s.hat == 0) for s in tr.states)
        assert all(np.all(c.hat == 0) for c in tr.correctors)

    def test_rejects_mu_ge_one(self):
        with pytest.raises(ValueError):
            run_limit(LimitState.zeros(sp.Grid.plane(16)), 1.0, LimitConfig())

    def test_taylor_green_is_steady(self):
        x, y = _xy(64)
        L = LimitState.from_physical(G64, {"u1": np.sin(x) * np.cos(y), "u2": -np.cos(x) * np.sin(y)})
        tr = run_limit(L, 0.0, LimitConfig(t_end=0.5, n_samples=1))
        assert np.max(np.abs(tr.states[-1].hat - tr.states[0].hat)) < 1e-12

    def test_matches_euler_oracle(self):
        psi = lambda x, y: np.sin(x) * np.sin(y) + 0.2 * np.cos(2 * x + y) + 0.1 * np.sin(x - 3 * y)  # noqa: E731
        u, v = _stream_velocity(psi, 64)
        x, y = _xy(64)
        r = 0.3 * np.cos(x + 2 * y)
        u3 = 0.2 * np.sin(3 * x) * np.cos(y)
        L = LimitState.from_physical(G64, {"u1": u, "u2": v, "r": r, "u3": u3})
        T, nsteps = 0.5, 400
        tr = run_limit(L, 0.0, LimitConfig(t_end=T, n_samples=1, dt=T / nsteps))
        ou, ov, (orr, ou3) = EulerOracle(64).run(u, v, [r, u3], T, nsteps)
        got = tr.states[-1].physical()
        assert _h1_rel(G64, got[LU1:LU1 + 2], np.stack([ou, ov])) < 1e-6
        assert _h1_rel(G64, got[LR], orr) < 1e-6
        assert _h1_rel(G64, got[LU3], ou3) < 1e-6

    def test_energy_drift(self, rng):
        L = _random_limit(G64, rng, kmax=4.0, amp=0.5)
        for mu in (0.0, 0.4):
            tr = run_limit(L, mu, LimitConfig(t_end=0.5, n_samples=5))
            e = np.array(tr.energy)
            assert np.max(np.abs(e / e[0] - 1)) < 1e-6

    def test_invariants_along_trajectory(self, rng):
        L = _random_limit(sp.Grid.plane(32), rng)
        tr = run_limit(L, 0.3, LimitConfig(t_end=0.3, n_samples=3), corrector_mu=0.5)
        assert max(tr.divergence) <= 1e-10
        for s in tr.states:
            assert abs(s.hat[LR, 0, 0, 0] - L.hat[LR, 0, 0, 0]) < 1e-12
            assert s.mean_b3_0 == L.mean_b3_0 and s.mean_r_0 == L.mean_r_0
        assert len(tr.correctors) == len(tr.states)


class TestCorrector:
    def test_term_by_term_oracle(self, rng):
        g = sp.Grid.plane(32)
        L = _random_limit(g, rng)
        C = CorrectorState(g, _random_limit(g, rng).hat[[LR, LU3]])
        mu, mu_lim = 0.45, 0.2
        tend = sp.inverse(g, corrector_rhs(C, L, mu, mu_lim, dealias=False))
        r, u1, u2, u3, b1, b2 = L.physical()
        rc, u3c = sp.inverse(g, C.hat)
        k = np.fft.fftfreq(32, 1.0 / 32)
        kx, ky = np.meshgrid(k, k, indexing="ij")

        def grad(f):
            fh = np.fft.fft2(f[..., 0])
            return (np.real(np.fft.ifft2(1j * kx * fh))[..., None], np.real(np.fft.ifft2(1j * ky * fh))[..., None])

        def along(a1, a2, f):
            fx, fy = grad(f)
            return a1 * fx + a2 * fy

        dt_r = -mu_lim * along(b1, b2, u3) / (1 + mu_lim**2)
        ref_rc = -along(u1, u2, rc) - mu * along(b1, b2, u3c) - along(b1, b2, u3) - (mu + mu_lim) * dt_r
        q = (1 + mu**2) * r - mu**2 * L.mean_r_0
        coef = (1 - mu * mu_lim) / ((1 + mu**2) * (1 + mu_lim**2))
        ref_u3c = -along(u1, u2, u3c) - mu / (1 + mu**2) * along(b1, b2, rc) - coef * along(b1, b2, q)
        assert np.max(np.abs(tend[0] - ref_rc)) < 1e-10
        assert np.max(np.abs(tend[1] - ref_u3c)) < 1e-10
        assert np.max(np.abs(sp.inverse(g, material_r_derivative(L, mu_lim, dealias=False)) - dt_r)) < 1e-10

    def test_zero_without_field(self, rng):
        g = sp.Grid.plane(32)
        L = _random_limit(g, rng)
        L = L.with_hat(np.concatenate([L.hat[:LB1], np.zeros_like(L.hat[LB1:])]))
        tr = run_limit(L, 0.0, LimitConfig(t_end=0.2, n_samples=2), corrector_mu=0.6)
        assert all(np.max(np.abs(c.hat)) == 0 for c in tr.correctors)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            corrector_rhs(CorrectorState.zeros(sp.Grid.plane(8)), LimitState.zeros(sp.Grid.plane(16)), 0.1, 0.0)


class TestFromState:
    def test_vertical_average(self, grid16):
        x, y, z = grid16.coordinates()
        s = State.from_physical(grid16, {"r": np.sin(x) + np.cos(z), "u3": np.cos(y), "b3": 1.5, "b1": np.sin(y)})
        L = limit_from_state(s)
        assert L.grid == grid16.horizontal()
        assert L.mean_b3_0 == pytest.approx(1.5)
        r = L.physical()[LR][..., 0]
        assert np.allclose(r, np.sin(x[..., 0]), atol=1e-14)
