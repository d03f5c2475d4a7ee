import numpy as np
import pytest
import scipy.linalg

from mhd3s import spectral as sp
from mhd3s.initdata import InitSpec, build_well_prepared
from mhd3s.operators import apply_large, symbol_LA, symbol_LM
from mhd3s.params import ScaleParams
from mhd3s.solver import (
    BlowUpError,
    PressureLaw,
    SolverConfig,
    full_rhs,
    nonstiff_rhs,
    run,
    step,
    stiff_propagator,
)
from mhd3s.state import B3, R, State

from conftest import random_state

PARAMS = ScaleParams(eps_m=0.1, eps_a=0.03)


def _mhd_oracle(state: State, params: ScaleParams, law: PressureLaw) -> np.ndarray:
    """V_t from the undivided equations, evaluated pointwise in advective form."""
    g = state.grid
    em, ea = params.eps_m, params.eps_a
    f = state.physical()
    r, u, b = f[0], f[1:4], f[4:7]
    d = lambda fh, ax: sp.inverse(g, sp.derivative(g, fh, ax))  # noqa: E731
    gr = np.stack([d(state.hat[0], a) for a in range(3)])
    gu = np.stack([[d(state.hat[1 + i], a) for a in range(3)] for i in range(3)])
    gb = np.stack([[d(state.hat[4 + i], a) for a in range(3)] for i in range(3)])
    s = em * r
    a, rho = law.a(s), law.rho(s)
    divu = gu[0, 0] + gu[1, 1] + gu[2, 2]
    out = np.empty_like(f)
    # a (r_t + u·∇r) + (aρ/ε_M) ∇·u = 0
    out[0] = -(u[0] * gr[0] + u[1] * gr[1] + u[2] * gr[2]) - rho * divu / em
    for i in range(3):
        adv = sum(u[j] * gu[i, j] for j in range(3))
        mag_p = sum(b[j] * gb[j, i] for j in range(3))
        tension = sum(b[j] * gb[i, j] for j in range(3))
        alf = (gb[i, 2] - gb[2, i]) / ea
        # ρ(u_t + u·∇u) + (aρ/ε_M)∇r + ∇|b|²/2 − (b·∇)b = (∂_z b − ∇b3)/ε_A
        out[1 + i] = -adv - a * gr[i] / em + (alf - mag_p + tension) / rho
        # b_t + u·∇b + (∇·u)b − (b·∇)u = (∂_z u − e_z ∇·u)/ε_A
        rhs_b = gu[i, 2] - (divu if i == 2 else 0.0)
        out[4 + i] = (
            -sum(u[j] * gb[i, j] for j in range(3)) - divu * b[i] + sum(b[j] * gu[i, j] for j in range(3)) + rhs_b / ea
        )
    return out


def _smooth_state(grid, rng, amp=0.3):
    # band-limited so every quadratic product is resolved; amp bounds every field
    s = random_state(grid, rng, decay=0.0, kmax=2.0)
    return s * (amp / np.max(np.abs(s.physical())))


def _alfven_wave(g: sp.Grid, mean_b3: float = 0.0) -> State:
    """Circularly polarized wave: an exact nonlinear solution with zero nonstiff tendency."""
    _, _, z = g.coordinates()
    return State.from_physical(
        g, {"b1": 0.5 * np.cos(z), "b2": -0.5 * np.sin(z), "u1": 0.3 * np.sin(z), "u2": 0.3 * np.cos(z), "b3": mean_b3}
    )


class TestPressureLaw:
    def test_normalization(self):
        law = PressureLaw()
        assert law.dpressure(1.0) == pytest.approx(1.0)
        assert law.a(0.0) == 1.0 and law.rho(0.0) == 1.0


class TestNonstiffRHS:
    def test_zero(self, grid16):
        assert np.all(nonstiff_rhs(State.zeros(grid16), PARAMS).hat == 0)

    def test_planar_rest_state(self, grid16):
        s = State.from_physical(grid16, {"r": 0.7, "b3": 1.3})
        assert nonstiff_rhs(s, PARAMS).norm(0) < 1e-14

    def test_matches_undivided_equations(self, rng):
        g = sp.Grid(12, 12, 12)
        for _ in range(3):
            s = _smooth_state(g, rng)
            ours = full_rhs(s, PARAMS, dealias=False).hat
            # 1/ρ and a(ε_M r) are not band-limited: compare on the stored modes
            ref = sp.forward(g, _mhd_oracle(s, PARAMS, PressureLaw(PARAMS.gamma)))
            assert np.max(np.abs(ours - ref)) < 1e-8 * np.max(np.abs(ref))

    def test_positivity_guard(self, grid16):
        x, _, _ = grid16.coordinates()
        s = State.from_physical(grid16, {"r": -20.0 * np.cos(x) ** 2})
        with pytest.raises(BlowUpError) as exc:
            nonstiff_rhs(s, PARAMS, t=0.25)
        assert exc.value.time == 0.25 and exc.value.extrema["r_min"] < -10


class TestStiffPropagator:
    def test_kernel_unchanged(self, grid16):
        x, y, _ = grid16.coordinates()
        mu = PARAMS.mu
        r = np.sin(x) * np.cos(y)
        s = State.from_physical(grid16, {"r": r, "u1": np.sin(y), "u2": np.sin(x), "b1": np.cos(y), "b3": 1.0 - mu * r})
        out = stiff_propagator(s, 0.37, PARAMS)
        assert (out - s).norm(0) < 1e-12 * s.norm(0)

    def test_unitary_and_solenoidal(self, grid16, rng):
        s = random_state(grid16, rng)
        for dt in (1e-3, 0.5, -0.2):
            out = stiff_propagator(s, dt, PARAMS)
            assert abs(out.norm(0) - s.norm(0)) < 1e-12 * s.norm(0)
            assert out.div_b_error() < 1e-12 * s.norm(0)

    def test_single_mode_matches_expm(self):
        g = sp.Grid(4, 4, 4)
        rng = np.random.default_rng(3)
        hat = np.zeros((7,) + g.spectral_shape, dtype=complex)
        v = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        v[6] = 0.0  # k·b = 0 for the (0,0,1) mode
        hat[:, 0, 0, 1] = v
        s = State(g, hat)
        dt = 0.123
        sym = symbol_LA(0, 0, 1) / PARAMS.eps_a + symbol_LM(0, 0, 1) / PARAMS.eps_m
        ref = scipy.linalg.expm(dt * sym) @ v
        out = stiff_propagator(s, dt, PARAMS).hat[:, 0, 0, 1]
        assert np.max(np.abs(out - ref)) < 1e-10

    def test_generator_is_large_operator(self, grid16, rng):
        s = random_state(grid16, rng)
        h = 1e-6
        fd = (stiff_propagator(s, h, PARAMS) - stiff_propagator(s, -h, PARAMS)) * (1 / (2 * h))
        ref = apply_large(s, PARAMS)
        assert (fd - ref).norm(0) < 1e-6 * ref.norm(0)


class TestStep:
    @pytest.mark.parametrize("integrator", ["exp-strang", "lawson-rk4"])
    def test_linear_only_data(self, integrator):
        g = sp.Grid(8, 8, 8)
        s = _alfven_wave(g)
        assert nonstiff_rhs(s, PARAMS).norm(0) < 1e-14
        cfg = SolverConfig(integrator=integrator, dealias=False)
        out = step(s, 0.05, cfg, PARAMS)
        ref = stiff_propagator(s, 0.05, PARAMS)
        assert (out - ref).norm(0) < 1e-12 * s.norm(0)

    def test_rejects_nonpositive_dt(self, grid16):
        with pytest.raises(ValueError):
            step(State.zeros(grid16), 0.0, SolverConfig(), PARAMS)

    @pytest.mark.parametrize("integrator,order", [("exp-strang", 2), ("lawson-rk4", 4), ("rk4-explicit", 4)])
    def test_convergence_order(self, integrator, order):
        g = sp.Grid(8, 8, 8)
        params = ScaleParams(eps_m=0.5, eps_a=0.3)
        s = _smooth_state(g, np.random.default_rng(7), amp=0.5)
        T = 0.2
        finals = []
        for n in (4, 8, 16):
            cfg = SolverConfig(integrator=integrator, dt=T / n, t_end=T, n_samples=1)
            finals.append(run(s, params, cfg).states[-1])
        e1 = (finals[0] - finals[1]).norm(0)
        e2 = (finals[1] - finals[2]).norm(0)
        observed = np.log2(e1 / e2)
        assert observed > order - 0.3

    def test_local_error_order(self):
        g = sp.Grid(8, 8, 8)
        s = _smooth_state(g, np.random.default_rng(8), amp=0.5)
        cfg = SolverConfig(integrator="lawson-rk4")

        def defect(dt):
            one = step(s, dt, cfg, PARAMS)
            two = step(step(s, dt / 2, cfg, PARAMS), dt / 2, cfg, PARAMS, t=dt / 2)
            return (one - two).norm(0)

        assert np.log2(defect(0.02) / defect(0.01)) > 4.5


class TestRun:
    def test_zero_init(self):
        g = sp.Grid(8, 8, 8)
        res = run(State.zeros(g), PARAMS, SolverConfig(t_end=0.1, n_samples=2))
        assert res.completed
        assert all(np.all(s.hat == 0) for s in res.states)
        assert np.all(res.A_u[-1] == 0)

    def test_kernel_init_conserves_mean(self):
        g = sp.Grid(8, 8, 8)
        x, y, _ = g.coordinates()
        r = 0.3 + 0.2 * np.sin(x + y)
        s = State.from_physical(g, {"r": r, "b3": 1.0 - PARAMS.mu * (r - 0.3)})
        res = run(s, PARAMS, SolverConfig(t_end=0.2, n_samples=4))
        means = [d["mean_r"] for d in res.diagnostics]
        assert max(abs(m - means[0]) for m in means) < 1e-8

    def test_diagnostics_and_outputs(self, tmp_path):
        g = sp.Grid(8, 8, 8)
        s = _smooth_state(g, np.random.default_rng(1))
        cfg = SolverConfig(integrator="lawson-rk4", t_end=0.1, n_samples=2, snapshot_every=1)
        res = run(s, PARAMS, cfg, out_dir=tmp_path)
        assert res.completed and len(res.states) == 3
        assert res.diagnostics[0]["A_u_n"] == 0.0 and res.diagnostics[0]["A_b_n"] == 0.0
        assert (tmp_path / "diagnostics.csv").read_text().startswith("t,")
        assert len(list(tmp_path.glob("snap_*.bin"))) == 3
        for d in res.diagnostics:
            assert d["divb_0"] < 1e-10 * s.norm(0)
            assert abs(d["mean_b3"] - res.diagnostics[0]["mean_b3"]) < 1e-8

    def test_blowup_reported_with_partial_trajectory(self):
        g = sp.Grid(8, 8, 8)
        s = _smooth_state(g, np.random.default_rng(2))
        res = run(s, PARAMS, SolverConfig(t_end=0.1, n_samples=2, blowup_norm=1e-6))
        assert res.status == "blowup" and "exceeds" in res.message
        assert len(res.states) == 1

    def test_time_integral_quadrature(self):
        from mhd3s.solver import _fast_integrands

        g = sp.Grid(8, 8, 8)
        params = ScaleParams(eps_m=0.2, eps_a=0.08)
        s = build_well_prepared(InitSpec(kmax=2.0, k0=2.0), params, g)
        cfg = SolverConfig(integrator="lawson-rk4", t_end=0.2, n_samples=40, fast_factor=0.1)
        res = run(s, params, cfg)
        gs = np.stack([_fast_integrands(st, params.mu) for st in res.states])
        w = np.full(len(res.times), res.times[1] - res.times[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        trap = np.tensordot(w, gs, axes=1)
        assert sp.sobolev_norm(g.horizontal(), trap[:2] - res.A_u[-1]) < 1e-3 * sp.sobolev_norm(g.horizontal(), trap[:2])

    @pytest.mark.slow
    def test_uniform_bound_and_resolution_independence(self):
        params = ScaleParams.from_nu(0.1, 0.5)
        cfg = SolverConfig(integrator="lawson-rk4", fast_factor=0.25, t_end=0.5, n_samples=5)
        peaks = []
        for n in (32, 48):
            g = sp.Grid.cube(n)
            s = build_well_prepared(InitSpec(), params, g)
            res = run(s, params, cfg, keep_states=False)
            assert res.completed
            norms = [d["norm_n"] for d in res.diagnostics]
            assert max(norms) < 10 * norms[0]
            peaks.append(max(norms) / norms[0])
        assert abs(peaks[0] - peaks[1]) < 0.1 * peaks[1]
