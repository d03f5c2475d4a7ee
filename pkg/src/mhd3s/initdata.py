"""Well-prepared initial data with ε-independent slow parts."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields as dc_fields

import numpy as np

from . import spectral as sp
from .operators import apply_large
from .params import ScaleParams
from .state import B1, B2, B3, R, U1, U2, U3, State

# Stream tags keep each random piece on its own generator, so changing one
# amplitude never changes another piece.
_TAGS = {"r_S": 1, "uh_S": 2, "u3_S": 3, "bh_S": 4, "r_I": 5, "u3_I": 6, "uh_F": 7, "b_F": 8}


@dataclass(frozen=True)
class InitSpec:
    """Random spectral initial data.

    Each piece is a Gaussian random field with spectral envelope 1 for
    |k| <= k0 and (|k|/k0)^(-decay) beyond, truncated at |k| <= kmax, then
    scaled to the given root-mean-square amplitude. A zero amplitude
    switches the piece off.
    """

    seed: int = 0
    kmax: float = 6.0
    k0: float = 2.0
    decay: float = 4.0
    amp_r_S: float = 0.5
    amp_uh_S: float = 0.5
    amp_u3_S: float = 0.5
    amp_bh_S: float = 0.5
    mean_b3: float = 1.0
    amp_r_I: float = 0.5
    amp_uh_F: float = 0.5
    amp_u3_I: float = 0.5
    amp_b_F: float = 0.5

    def __post_init__(self):
        for f in dc_fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"InitSpec.{f.name} must be finite, got {v!r}")
        if self.kmax <= 0 or self.k0 <= 0:
            raise ValueError("kmax and k0 must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Pieces:
    """Spectral building blocks on a 3D grid, already in their mode subspaces."""

    grid: sp.Grid
    r_S: np.ndarray
    uh_S: np.ndarray
    u3_S: np.ndarray
    bh_S: np.ndarray
    mean_b3: float
    r_I: np.ndarray
    u3_I: np.ndarray
    uh_F: np.ndarray
    bh_F: np.ndarray
    b3_F: np.ndarray

    @classmethod
    def from_physical(cls, grid: sp.Grid, mean_b3: float = 0.0, **fields) -> "Pieces":
        """Pieces from explicit physical arrays; absent ones are zero.

        Keywords: r_S, u3_S, r_I, u3_I, b3_F (scalars), uh_S, bh_S, uh_F, bh_F
        (pairs). Each is projected onto its subspace.
        """
        z = np.zeros(grid.spectral_shape, dtype=complex)

        def scal(name):
            return sp.forward(grid, np.broadcast_to(fields[name], grid.shape).astype(float)) if name in fields else z.copy()

        def vec(name):
            if name not in fields:
                return np.zeros((2,) + grid.spectral_shape, dtype=complex)
            a = np.stack([np.broadcast_to(c, grid.shape).astype(float) for c in fields[name]])
            return sp.forward(grid, a)

        unknown = set(fields) - {"r_S", "u3_S", "r_I", "u3_I", "b3_F", "uh_S", "bh_S", "uh_F", "bh_F"}
        if unknown:
            raise ValueError(f"unknown pieces {sorted(unknown)}")
        p = cls(grid, scal("r_S"), vec("uh_S"), scal("u3_S"), vec("bh_S"), float(mean_b3),
                scal("r_I"), scal("u3_I"), vec("uh_F"), vec("bh_F"), scal("b3_F"))
        return p.projected()

    def projected(self) -> "Pieces":
        g = self.grid
        az = lambda f: sp.vertical_average(g, f)  # noqa: E731
        b_F = np.concatenate([self.bh_F - az(self.bh_F), self.b3_F[None]])
        b_F[2, 0, 0, 0] = 0.0
        b_F = sp.leray(g, b_F)
        return Pieces(
            g,
            r_S=az(self.r_S),
            uh_S=sp.leray_h(g, az(self.uh_S)),
            u3_S=az(self.u3_S),
            bh_S=sp.leray_h(g, az(self.bh_S)),
            mean_b3=self.mean_b3,
            r_I=self.r_I - az(self.r_I),
            u3_I=self.u3_I - az(self.u3_I),
            uh_F=self.uh_F - sp.leray_h(g, az(self.uh_F)),
            bh_F=b_F[:2],
            b3_F=b_F[2],
        )


def reference_grid(spec: InitSpec, planar: bool = False) -> sp.Grid:
    """Smallest grid holding every mode with |k| <= kmax; random draws live here."""
    n = 2 * (int(np.floor(spec.kmax)) + 1)
    return sp.Grid(n, n, 1 if planar else n)


def _random_field(grid: sp.Grid, spec: InitSpec, tag: int, ncomp: int, planar: bool) -> np.ndarray:
    """Seeded Gaussian field with the spec's envelope.

    Drawn on the reference grid and resampled, so the result does not depend
    on the run resolution. A planar field is drawn on a horizontal grid and
    lifted.
    """
    g = reference_grid(spec, planar)
    rng = np.random.default_rng([spec.seed, tag])
    shape = (ncomp,) + g.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kk = np.sqrt(np.broadcast_to(g.k2, g.spectral_shape))
    env = np.where(kk <= spec.k0, 1.0, (np.maximum(kk, spec.k0) / spec.k0) ** (-spec.decay))
    env = env * (kk <= spec.kmax) * (kk > 0)
    f = sp.enforce_hermitian(g, c * env)
    if planar:
        return sp.lift(grid, sp.resample(g, f, grid.horizontal()))
    return sp.resample(g, f, grid)


def _scaled(grid: sp.Grid, f: np.ndarray, amp: float) -> np.ndarray:
    if amp == 0.0:
        return np.zeros_like(f)
    nrm = sp.sobolev_norm(grid, f)
    return f * (amp / nrm) if nrm > 0 else f


def make_pieces(spec: InitSpec, grid: sp.Grid) -> Pieces:
    """Random pieces; slow ones depend only on the spec and horizontal resolution."""
    if grid.is_2d:
        raise ValueError("initial data needs a 3D grid")
    kcut = min(grid.nx, grid.ny, grid.nz) / 3.0
    if spec.kmax >= kcut:
        raise ValueError(f"grid {grid.shape} too small for kmax={spec.kmax}; need kmax < {kcut:.2f}")
    g = grid
    p = Pieces(
        g,
        r_S=_random_field(g, spec, _TAGS["r_S"], 1, True)[0],
        uh_S=_random_field(g, spec, _TAGS["uh_S"], 2, True),
        u3_S=_random_field(g, spec, _TAGS["u3_S"], 1, True)[0],
        bh_S=_random_field(g, spec, _TAGS["bh_S"], 2, True),
        mean_b3=spec.mean_b3,
        r_I=_random_field(g, spec, _TAGS["r_I"], 1, False)[0],
        u3_I=_random_field(g, spec, _TAGS["u3_I"], 1, False)[0],
        uh_F=_random_field(g, spec, _TAGS["uh_F"], 2, False),
        bh_F=np.zeros((2,) + g.spectral_shape, dtype=complex),
        b3_F=np.zeros(g.spectral_shape, dtype=complex),
    )
    # fast magnetic piece: curl of a random vector potential
    A = _random_field(g, spec, _TAGS["b_F"], 3, False)
    ik = (1j * g.kx, 1j * g.ky, 1j * g.kz)
    curl = np.stack([ik[1] * A[2] - ik[2] * A[1], ik[2] * A[0] - ik[0] * A[2], ik[0] * A[1] - ik[1] * A[0]])
    p = Pieces(g, p.r_S, p.uh_S, p.u3_S, p.bh_S, p.mean_b3, p.r_I, p.u3_I, p.uh_F, curl[:2], curl[2]).projected()
    bF = _scaled(g, np.concatenate([p.bh_F, p.b3_F[None]]), spec.amp_b_F)
    return Pieces(
        g,
        r_S=_scaled(g, p.r_S, spec.amp_r_S),
        uh_S=_scaled(g, p.uh_S, spec.amp_uh_S),
        u3_S=_scaled(g, p.u3_S, spec.amp_u3_S),
        bh_S=_scaled(g, p.bh_S, spec.amp_bh_S),
        mean_b3=spec.mean_b3,
        r_I=_scaled(g, p.r_I, spec.amp_r_I),
        u3_I=_scaled(g, p.u3_I, spec.amp_u3_I),
        uh_F=_scaled(g, p.uh_F, spec.amp_uh_F),
        bh_F=bF[:2],
        b3_F=bF[2],
    )


def assemble(pieces: Pieces, params: ScaleParams) -> State:
    """Compose V⁰ from its pieces with the ε scalings of well-prepared data."""
    g = pieces.grid
    em, ea, mu = params.eps_m, params.eps_a, params.mu
    hat = np.zeros((7,) + g.spectral_shape, dtype=complex)
    hat[R] = pieces.r_S + em * pieces.r_I
    hat[U1:U2 + 1] = pieces.uh_S + ea * pieces.uh_F
    hat[U3] = pieces.u3_S + em * pieces.u3_I
    hat[B1:B2 + 1] = pieces.bh_S + ea * pieces.bh_F
    r_fluct = pieces.r_S.copy()
    r_fluct[0, 0, 0] = 0.0
    hat[B3] = -mu * r_fluct + ea * pieces.b3_F
    hat[B3, 0, 0, 0] += pieces.mean_b3
    return State(g, hat)


def build_well_prepared(spec: InitSpec, params: ScaleParams, grid: sp.Grid) -> State:
    return assemble(make_pieces(spec, grid), params)


def slow_state(pieces: Pieces) -> State:
    """The ε-independent slow part (r^S, P_h^div u_h^S, u3^S, b_h^S, ⟨⟨b3⟩⟩)."""
    g = pieces.grid
    hat = np.zeros((7,) + g.spectral_shape, dtype=complex)
    hat[R] = pieces.r_S
    hat[U1:U2 + 1] = pieces.uh_S
    hat[U3] = pieces.u3_S
    hat[B1:B2 + 1] = pieces.bh_S
    hat[B3, 0, 0, 0] = pieces.mean_b3
    return State(g, hat)


def validate_initial(state: State, params: ScaleParams, c: float = 100.0) -> dict:
    """Well-preparedness report; ``flagged`` when the large-operator residual exceeds ``c``."""
    large = apply_large(state, params)
    res = large.norm(params.n - 1)
    return {
        "large_residual": res,
        "norm_n": state.norm(params.n),
        "div_b": sp.sobolev_norm(state.grid, state.div_b()),
        "threshold": c,
        "flagged": bool(res > c),
    }
