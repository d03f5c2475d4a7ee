import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhd3s import spectral as sp

from conftest import random_hat


@pytest.fixture
def g():
    return sp.Grid(16, 16, 16)


def _xyz(g):
    return g.coordinates()


class TestGrid:
    def test_rejects_odd_sizes(self):
        with pytest.raises(ValueError):
            sp.Grid(15, 16, 16)
        with pytest.raises(ValueError):
            sp.Grid(16, 16, 3)

    def test_horizontal_grid(self):
        g = sp.Grid(8, 8, 1)
        assert g.is_2d and g.spectral_shape == (8, 8, 1)

    def test_dealias_box(self, g):
        m = g.dealias_mask
        assert m[5, 0, 0] and not m[6, 0, 0]
        assert not m[0, 0, 8]


class TestTransform:
    def test_constant(self, g):
        fh = sp.forward(g, np.ones(g.shape))
        assert fh[0, 0, 0] == pytest.approx(1.0)
        fh[0, 0, 0] = 0
        assert np.max(np.abs(fh)) < 1e-15

    def test_sine_coefficients(self, g):
        x, _, _ = _xyz(g)
        fh = sp.forward(g, np.sin(x))
        assert fh[1, 0, 0] == pytest.approx(-0.5j)
        assert fh[-1, 0, 0] == pytest.approx(0.5j)
        assert sp.sobolev_norm(g, fh) ** 2 == pytest.approx(0.5)

    def test_round_trip(self, g, rng):
        f = sp.inverse(g, random_hat(g, rng)[0])
        assert np.max(np.abs(sp.inverse(g, sp.forward(g, f)) - f)) < 1e-12

    def test_shape_mismatch(self, g):
        with pytest.raises(ValueError):
            sp.forward(g, np.zeros((8, 8, 8)))
        with pytest.raises(ValueError):
            sp.inverse(g, np.zeros((8, 8, 5), dtype=complex))

    def test_parseval(self, g, rng):
        fh, gh = random_hat(g, rng, 2)
        f, h = sp.inverse(g, fh), sp.inverse(g, gh)
        lhs = np.mean(f * h)
        assert sp.inner(g, fh, gh) == pytest.approx(lhs, rel=1e-12)


class TestDerivatives:
    def test_dx_sin(self, g):
        x, _, _ = _xyz(g)
        d = sp.inverse(g, sp.derivative(g, sp.forward(g, np.sin(x)), 0))
        assert np.max(np.abs(d - np.cos(x))) < 1e-12

    def test_dz_of_planar_field_is_zero(self, g):
        x, y, _ = _xyz(g)
        d = sp.derivative(g, sp.forward(g, np.sin(x) * np.cos(2 * y)), 2)
        assert np.all(d == 0)

    def test_mixed_partials_commute(self, g, rng):
        fh = random_hat(g, rng)[0]
        a = sp.derivative(g, sp.derivative(g, fh, 0), 1)
        b = sp.derivative(g, sp.derivative(g, fh, 1), 0)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_bad_axis(self, g):
        with pytest.raises(ValueError):
            sp.derivative(g, np.zeros(g.spectral_shape, dtype=complex), 3)

    def test_inverse_laplacian(self, g):
        _, _, z = _xyz(g)
        s = sp.forward(g, np.sin(z))
        assert np.allclose(sp.inverse(g, sp.inverse_laplacian(g, s)), -np.sin(z), atol=1e-13)
        c = sp.forward(g, 3.0 * np.ones(g.shape))
        assert np.all(sp.inverse_laplacian(g, c) == 0)
        assert np.all(sp.inverse_laplacian(g, s, horizontal_only=True) == 0)

    def test_dz_kills_vertical_average(self, g, rng):
        fh = random_hat(g, rng)[0]
        assert np.all(sp.derivative(g, sp.vertical_average(g, fh), 2) == 0)
        a = sp.derivative(g, sp.vertical_average(g, fh), 0)
        b = sp.vertical_average(g, sp.derivative(g, fh, 0))
        assert np.max(np.abs(a - b)) < 1e-15


class TestLeray:
    def test_gradient_killed(self, g):
        x, y, _ = _xyz(g)
        phi = sp.forward(g, np.sin(x + y))
        w = np.stack([sp.derivative(g, phi, 0), sp.derivative(g, phi, 1)])
        assert np.max(np.abs(sp.leray_h(g, w))) < 1e-15

    def test_solenoidal_fixed(self, g):
        x, y, _ = _xyz(g)
        psi = sp.forward(g, np.sin(x) * np.sin(y))
        w = np.stack([sp.derivative(g, psi, 1), -sp.derivative(g, psi, 0)])
        assert np.max(np.abs(sp.leray_h(g, w) - w)) < 1e-15

    def test_orthogonal_projection(self, g, rng):
        w, v = random_hat(g, rng, 2), random_hat(g, rng, 2)
        pw, pv = sp.leray_h(g, w), sp.leray_h(g, v)
        assert np.max(np.abs(sp.leray_h(g, pw) - pw)) < 1e-12
        for j in (0, 1, 2):
            assert sp.inner(g, pw, v, j) == pytest.approx(sp.inner(g, w, pv, j), rel=1e-12, abs=1e-14)

    def test_rejects_wrong_arity(self, g):
        with pytest.raises(ValueError):
            sp.leray_h(g, np.zeros((3,) + g.spectral_shape, dtype=complex))


class TestAverages:
    def test_examples(self, g):
        x, y, z = _xyz(g)
        assert np.max(np.abs(sp.vertical_average(g, sp.forward(g, np.sin(z))))) < 1e-15
        f = sp.forward(g, np.cos(x) * np.sin(2 * y))
        assert np.max(np.abs(sp.vertical_average(g, f) - f)) < 1e-15
        assert sp.full_average(g, sp.forward(g, 1 + np.sin(x))) == pytest.approx(1.0)

    def test_idempotent_and_mean(self, g, rng):
        fh = random_hat(g, rng)[0]
        a = sp.vertical_average(g, fh)
        assert np.array_equal(sp.vertical_average(g, a), a)
        assert sp.full_average(g, a) == sp.full_average(g, fh)


class TestNorms:
    def test_sine(self, g):
        x, _, _ = _xyz(g)
        f = sp.forward(g, np.sin(x))
        assert sp.sobolev_norm(g, f, 0) ** 2 == pytest.approx(0.5)
        assert sp.sobolev_norm(g, f, 1) ** 2 == pytest.approx(1.0)

    @pytest.mark.parametrize("j", [0, 1, 3])
    def test_constant(self, g, j):
        assert sp.sobolev_norm(g, sp.forward(g, -2.5 * np.ones(g.shape)), j) == pytest.approx(2.5)

    def test_monotone(self, g, rng):
        fh = random_hat(g, rng)[0]
        n = [sp.sobolev_norm(g, fh, j) for j in range(4)]
        assert n == sorted(n)

    def test_rejects_negative_order(self, g):
        with pytest.raises(ValueError):
            sp.sobolev_norm(g, np.zeros(g.spectral_shape, dtype=complex), -1)


class TestDealias:
    def test_inside_mask_unchanged(self, g, rng):
        f = random_hat(g, rng)[0] * g.dealias_mask
        assert np.array_equal(sp.dealias(g, f), f)

    def test_nyquist_zeroed(self, g):
        x, _, _ = _xyz(g)
        f = sp.forward(g, np.cos(8 * x))
        assert np.max(np.abs(sp.dealias(g, f))) == 0

    def test_idempotent(self, g, rng):
        fh = random_hat(g, rng)[0]
        assert np.array_equal(sp.dealias(g, sp.dealias(g, fh)), sp.dealias(g, fh))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([4, 8, 12]), j=st.integers(0, 3))
def test_leray_idempotent_property(seed, n, j):
    g = sp.Grid(n, n, n)
    rng = np.random.default_rng(seed)
    w = random_hat(g, rng, 2)
    p = sp.leray_h(g, w)
    assert sp.sobolev_norm(g, sp.leray_h(g, p) - p, j) <= 1e-12 * max(1.0, sp.sobolev_norm(g, w, j))
    assert sp.sobolev_norm(g, p, j) <= sp.sobolev_norm(g, w, j) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_enforce_hermitian_is_real_field_projection(seed):
    g = sp.Grid(8, 6, 4)
    rng = np.random.default_rng(seed)
    fh = random_hat(g, rng)[0]
    assert np.max(np.abs(sp.enforce_hermitian(g, fh) - fh)) < 1e-13
