"""
Large-operator analysis: the Alfvén and Mach operators, the fast /
intermediate / slow projections, the μ-dependent intermediate multipliers
and per-Fourier-mode eigenstructure checks.

Component order everywhere is (r, u1, u2, u3, b1, b2, b3). On a single
Fourier mode (k, l, m) a derivative ∂ acts as i·(k, l, m), so the symbol of
each large operator is i times a real matrix; ``1j * symbol`` is therefore
real symmetric.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral as sp
from .params import ScaleParams
from .state import B1, B2, B3, R, U1, U2, U3, State

# ---------------------------------------------------------------------------
# Large operators in physical form


def apply_LA(state: State) -> State:
    """Alfvén operator: u_h <- -∇_h b3 + ∂_z b_h, b_h <- ∂_z u_h, b3 <- -∇_h·u_h."""
    g = state.grid
    h = state.hat
    out = np.zeros_like(h)
    ikx, iky, ikz = 1j * g.kx, 1j * g.ky, 1j * g.kz
    out[U1] = -ikx * h[B3] + ikz * h[B1]
    out[U2] = -iky * h[B3] + ikz * h[B2]
    out[B1] = ikz * h[U1]
    out[B2] = ikz * h[U2]
    out[B3] = -(ikx * h[U1] + iky * h[U2])
    return State(g, out)


def apply_LM(state: State) -> State:
    """Mach operator: r <- -∇·u, u <- -∇r."""
    g = state.grid
    h = state.hat
    out = np.zeros_like(h)
    ikx, iky, ikz = 1j * g.kx, 1j * g.ky, 1j * g.kz
    out[R] = -(ikx * h[U1] + iky * h[U2] + ikz * h[U3])
    out[U1] = -ikx * h[R]
    out[U2] = -iky * h[R]
    out[U3] = -ikz * h[R]
    return State(g, out)


def apply_large(state: State, params: ScaleParams) -> State:
    """(1/eps_a) L_A V + (1/eps_m) L_M V."""
    return apply_LA(state) * (1.0 / params.eps_a) + apply_LM(state) * (1.0 / params.eps_m)


def apply_LA_plus_muLM(state: State, mu: float) -> State:
    return apply_LA(state) + apply_LM(state) * mu


# ---------------------------------------------------------------------------
# Per-mode symbols


def symbol_LA(k, l, m) -> np.ndarray:
    """Symbol of L_A; broadcasts over array-valued wavenumbers, shape (..., 7, 7)."""
    k, l, m = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (k, l, m)))
    s = np.zeros(k.shape + (7, 7), dtype=complex)
    s[..., U1, B3] = -1j * k
    s[..., U1, B1] = 1j * m
    s[..., U2, B3] = -1j * l
    s[..., U2, B2] = 1j * m
    s[..., B1, U1] = 1j * m
    s[..., B2, U2] = 1j * m
    s[..., B3, U1] = -1j * k
    s[..., B3, U2] = -1j * l
    return s


def symbol_LM(k, l, m) -> np.ndarray:
    """Symbol of L_M, shape (..., 7, 7)."""
    k, l, m = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (k, l, m)))
    s = np.zeros(k.shape + (7, 7), dtype=complex)
    for col, kk in ((U1, k), (U2, l), (U3, m)):
        s[..., R, col] = -1j * kk
        s[..., col, R] = -1j * kk
    return s


def large_symbol(k, l, m, mu: float) -> np.ndarray:
    """Symbol of L_A + μ L_M."""
    return symbol_LA(k, l, m) + mu * symbol_LM(k, l, m)


def stiff_symbol_hermitian(grid: sp.Grid, params: ScaleParams) -> np.ndarray:
    """Real symmetric matrices i·symbol(L_A/eps_a + L_M/eps_m), one per stored mode.

    Returned with shape (nmodes, 7, 7), modes in C order of ``grid.spectral_shape``.
    """
    kx, ky, kz = (np.broadcast_to(a, grid.spectral_shape).ravel() for a in (grid.kx, grid.ky, grid.kz))
    s = symbol_LA(kx, ky, kz) / params.eps_a + symbol_LM(kx, ky, kz) / params.eps_m
    return (1j * s).real.copy()


# ---------------------------------------------------------------------------
# Projections and modes


def _az(grid, f):
    return sp.vertical_average(grid, f)


def _avv(grid, f):
    out = np.zeros_like(f)
    out[..., 0, 0, 0] = f[..., 0, 0, 0]
    return out


def project_P0(state: State) -> State:
    """Projection onto the null space of L_A (b assumed solenoidal)."""
    g, h = state.grid, state.hat
    out = np.zeros_like(h)
    out[R] = h[R]
    out[U1:U2 + 1] = sp.leray_h(g, _az(g, h[U1:U2 + 1]))
    out[U3] = h[U3]
    out[B1:B2 + 1] = _az(g, h[B1:B2 + 1])
    out[B3] = _avv(g, h[B3])
    return State(g, out)


def project_P1(state: State) -> State:
    g, h = state.grid, state.hat
    out = h.copy()
    out[R] = _az(g, h[R])
    out[U3] = _az(g, h[U3])
    return State(g, out)


def project_P(state: State) -> State:
    """P = P0 P1 (the slow projection)."""
    return project_P0(project_P1(state))


@dataclass(frozen=True, eq=False)
class ModeTriple:
    fast: State
    intermediate: State
    slow: State

    def total(self) -> State:
        return self.fast + self.intermediate + self.slow


def decompose_modes(state: State, div_tol: float = 1e-10) -> ModeTriple:
    """Split V into V^F = (I-P0)V, V^I = (I-P1)V, V^S = P V.

    Raises:
        ValueError: if ``max |k·b̂| > div_tol * ‖b‖_0``.
    """
    bnorm = sp.sobolev_norm(state.grid, state.b)
    if state.div_b_error() > div_tol * max(bnorm, 1e-300):
        raise ValueError(
            f"magnetic field is not divergence-free: max|k·b̂|={state.div_b_error():.3e}, ‖b‖_0={bnorm:.3e}"
        )
    g, h = state.grid, state.hat
    slow = project_P(state)
    inter = np.zeros_like(h)
    inter[R] = h[R] - _az(g, h[R])
    inter[U3] = h[U3] - _az(g, h[U3])
    fast = h - slow.hat - inter
    return ModeTriple(State(g, fast), State(g, inter), slow)


# ---------------------------------------------------------------------------
# Intermediate multipliers Q, A, B, C, D


@dataclass(frozen=True)
class MultiplierSet:
    """Per-mode values of the order-zero multipliers for given μ."""

    Q: float
    A: float
    B: float
    C: float
    D: float
    D_alt: float  # D from the closed form that isolates sqrt(1+μ²)


def _multiplier_core(s, mu):
    """Multipliers as functions of s = m²/|k|² (the symbol of Δ⁻¹∂_z²)."""
    s = np.asarray(s, dtype=float)
    a = 1.0 + mu * mu
    rad = np.sqrt(a * a - 4.0 * mu * mu * s)
    Q = np.sqrt(2.0) / np.sqrt(a + rad)
    C = -Q / (1.0 - mu * mu * s * Q * Q)
    A = -C / Q
    B = s * C * Q
    D = 1.0 / Q
    rad2 = np.sqrt(mu * mu * (2.0 - 4.0 * s) + mu**4 + 1.0)
    D_alt = np.sqrt(a) - 4.0 * mu * mu * s / (
        (rad2 + a) * (np.sqrt(2.0) * np.sqrt(rad2 + a) + 2.0 * np.sqrt(a))
    )
    return Q, A, B, C, D, D_alt


def _check_mu(mu):
    if not 0.0 <= mu < 1.0:
        raise ValueError(f"mu must lie in [0, 1), got {mu}")


def multipliers(k: int, l: int, m: int, mu: float, tol: float = 1e-12) -> MultiplierSet:
    """Q̂, Â, B̂, Ĉ, D̂ on lattice mode (k, l, m)."""
    if k == 0 and l == 0 and m == 0:
        raise ValueError("multipliers are undefined on the zero mode")
    _check_mu(mu)
    s = m * m / float(k * k + l * l + m * m)
    vals = [float(v) for v in _multiplier_core(s, mu)]
    out = MultiplierSet(*vals)
    if abs(out.D - out.D_alt) > tol * max(1.0, abs(out.D)):
        raise ArithmeticError(f"D identity failed on ({k},{l},{m}), mu={mu}: {out.D} vs {out.D_alt}")
    return out


def multiplier_arrays(grid: sp.Grid, mu: float) -> dict[str, np.ndarray]:
    """Multipliers on every stored mode; the zero mode uses s = 0."""
    _check_mu(mu)
    s = np.broadcast_to(grid.kz**2 * grid.inv_k2, grid.spectral_shape)
    Q, A, B, C, D, D_alt = _multiplier_core(s, mu)
    return {"s": s, "Q": Q, "A": A, "B": B, "C": C, "D": D, "D_alt": D_alt}


def alpha_beta(state: State, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagnostic intermediate variables (spectral).

    alpha = (1-⟨·⟩_z)(r - μ b3 + μ³ C Q Δ⁻¹∂_z² b3)
    beta  = (1-⟨·⟩_z)(D u3 + μ² C Δ⁻¹ ∂_z ∇_h·u_h)
    """
    g, h = state.grid, state.hat
    mp = multiplier_arrays(g, mu)
    s, Q, C, D = mp["s"], mp["Q"], mp["C"], mp["D"]
    alpha = h[R] - mu * h[B3] + mu**3 * C * Q * s * h[B3]
    # Δ⁻¹ ∂_z ∂_x has symbol m k / |k|^2
    dzdiv = (g.kz * g.kx * h[U1] + g.kz * g.ky * h[U2]) * g.inv_k2
    beta = D * h[U3] + mu**2 * C * dzdiv
    alpha = alpha - _az(g, alpha)
    beta = beta - _az(g, beta)
    return alpha, beta


def _mode_arrays(k, l, m):
    k, l, m = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (k, l, m)))
    k2 = k * k + l * l + m * m
    inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    return k, l, m, inv


def intermediate_vectors(k, l, m, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Symbols of the 7-vectors V_α (with its gradient part) and V_β, shape (..., 7)."""
    _check_mu(mu)
    k, l, m, inv = _mode_arrays(k, l, m)
    _, A, B, C, D, _ = _multiplier_core(m * m * inv, mu)
    va = np.zeros(k.shape + (7,), dtype=complex)
    vb = np.zeros(k.shape + (7,), dtype=complex)
    va[..., R] = 1.0
    va[..., B1] = mu * A * m * k * inv
    va[..., B2] = mu * A * m * l * inv
    va[..., B3] = mu * A * m * m * inv - mu + mu**3 * B
    vb[..., U1] = mu**2 * C * m * k * inv
    vb[..., U2] = mu**2 * C * m * l * inv
    vb[..., U3] = D
    return va, vb


def vab_residual_vectors(k, l, m, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode residuals of (L_A+μL_M)V_α + μQ∂_zV_β and the α↔β counterpart."""
    va, vb = intermediate_vectors(k, l, m, mu)
    k, l, m, inv = _mode_arrays(k, l, m)
    Q = _multiplier_core(m * m * inv, mu)[0]
    L = large_symbol(k, l, m, mu)
    dz = (1j * m * mu * Q)[..., None]
    res_a = np.einsum("...ij,...j->...i", L, va) + dz * vb
    res_b = np.einsum("...ij,...j->...i", L, vb) + dz * va
    return res_a, res_b


def verify_vab_identity(state: State, mu: float) -> dict[str, float]:
    """Contract the V_α/V_β residual vectors with a test state and return norms.

    Returns:
        dict with ``alpha`` and ``beta`` residual L² norms and the reference
        scale ``h1`` = ‖Ṽ‖_1.
    """
    g = state.grid
    shape = g.spectral_shape
    kx, ky, kz = (np.broadcast_to(a, shape) for a in (g.kx, g.ky, g.kz))
    res_a, res_b = vab_residual_vectors(kx, ky, kz, mu)
    vt = np.moveaxis(state.hat, 0, -1)
    ra = np.sum(res_a * vt, axis=-1)
    rb = np.sum(res_b * vt, axis=-1)
    return {
        "alpha": sp.sobolev_norm(g, ra),
        "beta": sp.sobolev_norm(g, rb),
        "h1": state.norm(1),
    }


# ---------------------------------------------------------------------------
# Eigenstructure


def p_rank(k: int, l: int, m: int) -> int:
    """Rank of the slow projection P on the solenoidal 6-dim subspace of mode (k,l,m).

    From the block form of P: every block carries ⟨·⟩_z so nothing survives
    when m != 0; for m = 0 the survivors are r, u3, the solenoidal part of
    u_h and the horizontal b_h direction orthogonal to (k, l).
    """
    if k == 0 and l == 0 and m == 0:
        raise ValueError("zero mode has no solenoidal subspace of dimension 6")
    if m != 0:
        return 0
    return 4


def solenoidal_basis(k, l, m) -> np.ndarray:
    """Orthonormal 7x6 basis of span(r, u) ⊕ {b : (k,l,m)·b = 0}."""
    kv = np.array([k, l, m], dtype=float)
    kv /= np.linalg.norm(kv)
    _, _, vt = np.linalg.svd(kv.reshape(1, 3))
    perp = vt[1:]
    basis = np.zeros((7, 6))
    basis[:4, :4] = np.eye(4)
    basis[4:, 4] = perp[0]
    basis[4:, 5] = perp[1]
    return basis


@dataclass
class EigenReport:
    mode: tuple[int, int, int]
    mu: float
    eigenvalues: list[float]  # real λ with symbol eigenvalue -iλ, sorted
    zero_multiplicity: int
    p_rank: int
    intermediate_expected: float | None  # m μ Q̂ (None when m = 0)
    intermediate_error: float | None  # relative error of the matched ±pair
    fast_floor: float  # analytic lower bound |m| (m != 0) or |k_h| (m = 0)
    min_remaining: float | None
    checks: dict[str, bool] = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and all(self.checks.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def verify_eigenstructure(
    k: int,
    l: int,
    m: int,
    mu: float,
    rel_tol: float = 1e-9,
    zero_tol: float = 1e-10,
) -> EigenReport:
    """Eigendecompose the symbol of L_A+μL_M on the solenoidal subspace of one mode."""
    if k == 0 and l == 0 and m == 0:
        raise ValueError("zero mode rejected")
    _check_mu(mu)
    kmag = float(np.sqrt(k * k + l * l + m * m))
    khmag = float(np.sqrt(k * k + l * l))
    floor = float(abs(m)) if m != 0 else khmag
    rank = p_rank(k, l, m)
    expected = None
    if m != 0:
        expected = abs(m) * mu * multipliers(k, l, m, mu).Q
    report = EigenReport(
        mode=(int(k), int(l), int(m)),
        mu=float(mu),
        eigenvalues=[],
        zero_multiplicity=-1,
        p_rank=rank,
        intermediate_expected=expected,
        intermediate_error=None,
        fast_floor=floor,
        min_remaining=None,
    )
    try:
        basis = solenoidal_basis(k, l, m)
        herm = (1j * large_symbol(k, l, m, mu)).real
        lam = np.linalg.eigvalsh(basis.T @ herm @ basis)
    except np.linalg.LinAlgError as exc:
        report.error = f"eigensolver failure: {exc}"
        return report
    lam = np.sort(lam)
    report.eigenvalues = [float(x) for x in lam]
    scale = max(1.0, kmag)
    is_zero = np.abs(lam) <= zero_tol * scale
    report.zero_multiplicity = int(is_zero.sum())
    # at μ = 0 the intermediate pair ±mμQ̂ merges into the kernel
    merged = expected is not None and expected <= zero_tol * scale
    report.checks["zero_multiplicity"] = report.zero_multiplicity == rank + (2 if merged else 0)
    if merged:
        report.intermediate_error = 0.0
    remaining = list(lam[~is_zero])
    if expected is not None and not merged:
        errs = []
        for target in (expected, -expected):
            idx = int(np.argmin([abs(x - target) for x in remaining]))
            errs.append(abs(remaining[idx] - target) / abs(target))
            remaining.pop(idx)
        report.intermediate_error = float(max(errs))
        report.checks["intermediate_pair"] = report.intermediate_error <= rel_tol
    if remaining:
        report.min_remaining = float(min(abs(x) for x in remaining))
        report.checks["fast_floor"] = report.min_remaining >= floor * (1.0 - rel_tol) and floor > 0
    return report


def random_modes(rng: np.random.Generator, count: int, kmax: int = 8) -> list[tuple[int, int, int]]:
    """Random nonzero lattice modes in the box |k_i| <= kmax."""
    modes = []
    while len(modes) < count:
        k, l, m = (int(x) for x in rng.integers(-kmax, kmax + 1, size=3))
        if (k, l, m) != (0, 0, 0):
            modes.append((k, l, m))
    return modes


# ---------------------------------------------------------------------------
# Static-estimate bracket


def static_bracket(state: State, mu: float, j: int) -> float:
    """Sum of the fast/intermediate norms that are equivalent to ‖(L_A+μL_M)V‖_j."""
    g = state.grid
    modes = decompose_modes(state, div_tol=np.inf)
    f, i = modes.fast.hat, modes.intermediate.hat
    dz = lambda x: sp.derivative(g, x, 2)  # noqa: E731
    uhF = f[U1:U2 + 1]
    t1 = sp.sobolev_norm(g, dz(uhF), j)
    t2 = sp.sobolev_norm(g, sp.derivative(g, uhF[0], 0) + sp.derivative(g, uhF[1], 1), j)
    # ∂_z(b_h^F - μ Δ⁻¹ ∇_h ∂_z r^I)
    lap_inv_dz_rI = sp.inverse_laplacian(g, dz(i[R]))
    corr = np.stack([sp.derivative(g, lap_inv_dz_rI, 0), sp.derivative(g, lap_inv_dz_rI, 1)])
    t3 = sp.sobolev_norm(g, dz(f[B1:B2 + 1] - mu * corr), j)
    # b3^F + μ Δ⁻¹ Δ_h r, in H^{j+1}
    lap_h_r = -g.kh2 * state.hat[R]
    t4 = sp.sobolev_norm(g, f[B3] + mu * sp.inverse_laplacian(g, lap_h_r), j + 1)
    t5 = mu * (sp.sobolev_norm(g, dz(i[R]), j) + sp.sobolev_norm(g, dz(i[U3]), j))
    return t1 + t2 + t3 + t4 + t5
