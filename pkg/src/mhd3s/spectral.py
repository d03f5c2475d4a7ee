"""
Fourier representation of periodic fields on the 2π-periodic torus.

Fields are stored as half-lattice coefficient arrays produced by a real FFT
along the last (z) axis, normalized so that the coefficient of the zero mode
is the mean of the field and Parseval reads

    mean(|f|^2) = sum over the full lattice of |f̂(k)|^2.

Arrays may carry leading component axes (e.g. shape ``(3, nx, ny, nz//2+1)``
for a vector field); every operation acts on the trailing three axes.

A grid with ``nz == 1`` is a horizontal (two-dimensional) grid; its single
z-plane is the ``kz = 0`` plane.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

_AXES = (-3, -2, -1)


def fft_workers() -> int:
    """Thread count for FFTs, capped by the ``MHD3S_THREADS`` env var."""
    try:
        return max(1, int(os.environ.get("MHD3S_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 2π)^3 (or [0, 2π)^2 when ``nz == 1``).

    Attributes:
        nx: points along x (positive, even)
        ny: points along y (positive, even)
        nz: points along z (positive, even, or 1 for a horizontal grid)
    """

    nx: int
    ny: int
    nz: int = 1

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n <= 0 or n % 2:
                raise ValueError(f"{name} must be a positive even integer, got {n!r}")
        if not isinstance(self.nz, (int, np.integer)) or self.nz <= 0 or (self.nz % 2 and self.nz != 1):
            raise ValueError(f"nz must be a positive even integer or 1, got {self.nz!r}")

    @classmethod
    def cube(cls, n: int) -> "Grid":
        return cls(n, n, n)

    @classmethod
    def plane(cls, n: int) -> "Grid":
        return cls(n, n, 1)

    @property
    def is_2d(self) -> bool:
        return self.nz == 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz // 2 + 1)

    @property
    def npoints(self) -> int:
        return self.nx * self.ny * self.nz

    def horizontal(self) -> "Grid":
        """The two-dimensional grid sharing this grid's horizontal resolution."""
        return Grid(self.nx, self.ny, 1)

    # Wavenumbers. fftfreq puts the Nyquist mode at -n/2; it is zeroed anyway.
    @cached_property
    def kx(self) -> np.ndarray:
        return (np.fft.fftfreq(self.nx) * self.nx).reshape(-1, 1, 1)

    @cached_property
    def ky(self) -> np.ndarray:
        return (np.fft.fftfreq(self.ny) * self.ny).reshape(1, -1, 1)

    @cached_property
    def kz(self) -> np.ndarray:
        return (np.fft.rfftfreq(self.nz) * self.nz).reshape(1, 1, -1)

    def k(self, axis: int) -> np.ndarray:
        return (self.kx, self.ky, self.kz)[axis]

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2 + self.kz**2

    @cached_property
    def kh2(self) -> np.ndarray:
        return np.broadcast_to(self.kx**2 + self.ky**2, self.spectral_shape)

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """False on every mode that carries a Nyquist wavenumber."""
        keep = (np.abs(self.kx) < self.nx / 2) & (np.abs(self.ky) < self.ny / 2)
        if self.nz > 1:
            keep = keep & (np.abs(self.kz) < self.nz / 2)
        return np.broadcast_to(keep, self.spectral_shape)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule box: keep modes with |k_i| < n_i / 3 on every axis."""
        keep = (np.abs(self.kx) < self.nx / 3) & (np.abs(self.ky) < self.ny / 3)
        if self.nz > 1:
            keep = keep & (np.abs(self.kz) < self.nz / 3)
        return np.broadcast_to(keep, self.spectral_shape)

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored half-lattice mode in the full lattice."""
        w = np.full(self.nz // 2 + 1, 2.0)
        w[0] = 1.0
        if self.nz > 1:
            w[-1] = 1.0
        return np.broadcast_to(w.reshape(1, 1, -1), self.spectral_shape)

    @cached_property
    def inv_k2(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        nz = self.k2 != 0
        out[nz] = 1.0 / np.broadcast_to(self.k2, self.spectral_shape)[nz]
        return out

    @cached_property
    def inv_kh2(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        nz = self.kh2 != 0
        out[nz] = 1.0 / self.kh2[nz]
        return out

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical coordinate arrays (x, y, z), each of shape ``self.shape``."""
        x = 2 * np.pi * np.arange(self.nx) / self.nx
        y = 2 * np.pi * np.arange(self.ny) / self.ny
        z = 2 * np.pi * np.arange(self.nz) / self.nz
        return np.meshgrid(x, y, z, indexing="ij")


def _check_physical(grid: Grid, f: np.ndarray) -> None:
    if f.shape[-3:] != grid.shape:
        raise ValueError(f"physical field shape {f.shape[-3:]} does not match grid {grid.shape}")
    if np.iscomplexobj(f):
        raise ValueError("physical data must be real")


def _check_spectral(grid: Grid, fhat: np.ndarray) -> None:
    if fhat.shape[-3:] != grid.spectral_shape:
        raise ValueError(
            f"spectral field shape {fhat.shape[-3:]} does not match grid {grid.spectral_shape}"
        )


def forward(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Physical values to normalized Fourier coefficients (Nyquist zeroed)."""
    f = np.asarray(f)
    _check_physical(grid, f)
    fhat = sfft.rfftn(f, axes=_AXES, workers=fft_workers())
    fhat /= grid.npoints
    fhat *= grid.nyquist_free
    return fhat


def inverse(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Normalized Fourier coefficients to physical values."""
    _check_spectral(grid, fhat)
    f = sfft.irfftn(fhat, s=grid.shape, axes=_AXES, workers=fft_workers())
    f *= grid.npoints
    return f


def derivative(grid: Grid, fhat: np.ndarray, axis: int) -> np.ndarray:
    """Spectral derivative along ``axis`` (0=x, 1=y, 2=z)."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis!r}")
    _check_spectral(grid, fhat)
    return 1j * grid.k(axis) * fhat


def gradient(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    return np.stack([derivative(grid, fhat, a) for a in range(3)])


def divergence(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    return 1j * (grid.kx * vhat[0] + grid.ky * vhat[1] + grid.kz * vhat[2])


def laplacian(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    return -grid.k2 * fhat


def inverse_laplacian(grid: Grid, fhat: np.ndarray, horizontal_only: bool = False) -> np.ndarray:
    """Apply Δ⁻¹ (or Δ_h⁻¹); kernel modes of the operator map to zero."""
    _check_spectral(grid, fhat)
    if horizontal_only:
        return -grid.inv_kh2 * fhat
    return -grid.inv_k2 * fhat


def leray_h(grid: Grid, wh: np.ndarray) -> np.ndarray:
    """Two-dimensional Leray-Helmholtz projection w_h - ∇_h Δ_h⁻¹ ∇_h·w_h.

    Args:
        wh: spectral horizontal vector field, shape ``(2, *grid.spectral_shape)``
    """
    if wh.shape[0] != 2:
        raise ValueError("leray_h expects a 2-component horizontal field")
    _check_spectral(grid, wh[0])
    kx, ky = grid.kx, grid.ky
    proj = (kx * wh[0] + ky * wh[1]) * grid.inv_kh2
    return np.stack([wh[0] - kx * proj, wh[1] - ky * proj])


def leray(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    """Three-dimensional projection onto solenoidal fields, v - k(k·v)/|k|^2."""
    kx, ky, kz = grid.kx, grid.ky, grid.kz
    proj = (kx * vhat[0] + ky * vhat[1] + kz * vhat[2]) * grid.inv_k2
    return np.stack([vhat[0] - kx * proj, vhat[1] - ky * proj, vhat[2] - kz * proj])


def vertical_average(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Keep only the kz = 0 plane (result is z-independent)."""
    _check_spectral(grid, fhat)
    out = np.zeros_like(fhat)
    out[..., 0] = fhat[..., 0]
    return out


def full_average(grid: Grid, fhat: np.ndarray):
    """Mean over the torus, i.e. the real part of the (0,0,0) coefficient."""
    _check_spectral(grid, fhat)
    return fhat[..., 0, 0, 0].real


def dealias(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    return fhat * grid.dealias_mask


def inner(grid: Grid, fhat: np.ndarray, ghat: np.ndarray, j: int = 0) -> float:
    """Weighted H^j inner product sum (1+|k|^2)^j f̂ conj(ĝ), summed over components."""
    w = grid.weights * (1.0 + grid.k2) ** j if j else grid.weights
    return float(np.sum(w * (fhat * np.conj(ghat)).real))


def sobolev_norm(grid: Grid, fhat: np.ndarray, j: int = 0) -> float:
    """H^j norm with spectral weight (1+|k|^2)^j.

    Leading component axes are summed, so a vector field's norm is the
    root-sum-square of its components' norms.
    """
    if j < 0 or int(j) != j:
        raise ValueError(f"Sobolev order must be a nonnegative integer, got {j!r}")
    _check_spectral(grid, fhat)
    return float(np.sqrt(max(inner(grid, fhat, fhat, int(j)), 0.0)))


def enforce_hermitian(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Project arbitrary coefficients onto those of a real, Nyquist-free field."""
    return forward(grid, inverse(grid, fhat * grid.nyquist_free))


# Horizontal <-> three-dimensional transfers. The kz = 0 plane of a 3D grid
# and the single plane of the matching horizontal grid share coefficients.

def to_horizontal(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """kz = 0 plane of a 3D field as a field on ``grid.horizontal()``."""
    _check_spectral(grid, fhat)
    return fhat[..., :1].copy()


def lift(grid: Grid, f2hat: np.ndarray) -> np.ndarray:
    """Embed a horizontal field as a z-independent field on the 3D ``grid``."""
    out = np.zeros(f2hat.shape[:-3] + grid.spectral_shape, dtype=complex)
    out[..., :1] = f2hat
    return out


def resample(src: Grid, fhat: np.ndarray, dst: Grid) -> np.ndarray:
    """Copy the modes both grids represent without Nyquist content; zero the rest."""
    _check_spectral(src, fhat)
    if src.is_2d != dst.is_2d:
        raise ValueError("resample needs two 3D grids or two horizontal grids")
    out = np.zeros(fhat.shape[:-3] + dst.spectral_shape, dtype=complex)
    cx = min(src.nx, dst.nx) // 2
    cy = min(src.ny, dst.ny) // 2
    cz = 1 if src.is_2d else min(src.nz, dst.nz) // 2
    xs = np.r_[0:cx, -cx + 1:0]
    ys = np.r_[0:cy, -cy + 1:0]
    out[..., xs[:, None], ys[None, :], :cz] = fhat[..., xs[:, None], ys[None, :], :cz]
    return out * dst.nyquist_free
