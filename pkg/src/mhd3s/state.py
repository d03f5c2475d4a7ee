"""State vector V = (r, u1, u2, u3, b1, b2, b3) held in spectral form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp

FIELD_NAMES = ("r", "u1", "u2", "u3", "b1", "b2", "b3")
R, U1, U2, U3, B1, B2, B3 = range(7)


@dataclass(frozen=True, eq=False)
class State:
    """Seven spectral fields on one grid.

    ``hat`` has shape ``(7, *grid.spectral_shape)``. Arithmetic returns new
    states; nothing mutates ``hat`` in place.
    """

    grid: sp.Grid
    hat: np.ndarray

    def __post_init__(self):
        if self.hat.shape != (7,) + self.grid.spectral_shape:
            raise ValueError(
                f"state array has shape {self.hat.shape}, expected {(7,) + self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: sp.Grid) -> "State":
        return cls(grid, np.zeros((7,) + grid.spectral_shape, dtype=complex))

    @classmethod
    def from_physical(cls, grid: sp.Grid, fields) -> "State":
        """Build from a (7, nx, ny, nz) real array or a mapping of field name to array.

        Missing names in a mapping default to zero.
        """
        if isinstance(fields, dict):
            unknown = set(fields) - set(FIELD_NAMES)
            if unknown:
                raise ValueError(f"unknown field names {sorted(unknown)}")
            arr = np.zeros((7,) + grid.shape)
            for i, name in enumerate(FIELD_NAMES):
                if name in fields:
                    arr[i] = np.broadcast_to(fields[name], grid.shape)
        else:
            arr = np.asarray(fields, dtype=float)
        return cls(grid, sp.forward(grid, arr))

    def physical(self) -> np.ndarray:
        return sp.inverse(self.grid, self.hat)

    # component views
    @property
    def r(self) -> np.ndarray:
        return self.hat[R]

    @property
    def u(self) -> np.ndarray:
        return self.hat[U1:U3 + 1]

    @property
    def b(self) -> np.ndarray:
        return self.hat[B1:B3 + 1]

    @property
    def uh(self) -> np.ndarray:
        return self.hat[U1:U2 + 1]

    @property
    def bh(self) -> np.ndarray:
        return self.hat[B1:B2 + 1]

    def replace(self, **components) -> "State":
        """Copy with named components (``r``, ``u1`` ... ``b3``) replaced."""
        hat = self.hat.copy()
        for name, value in components.items():
            hat[FIELD_NAMES.index(name)] = value
        return State(self.grid, hat)

    def __add__(self, other: "State") -> "State":
        return State(self.grid, self.hat + other.hat)

    def __sub__(self, other: "State") -> "State":
        return State(self.grid, self.hat - other.hat)

    def __mul__(self, c) -> "State":
        return State(self.grid, self.hat * c)

    __rmul__ = __mul__

    def __neg__(self) -> "State":
        return State(self.grid, -self.hat)

    def norm(self, j: int = 0) -> float:
        return sp.sobolev_norm(self.grid, self.hat, j)

    def div_b(self) -> np.ndarray:
        return sp.divergence(self.grid, self.b)

    def div_b_error(self) -> float:
        """max_k |k·b̂(k)| (the spectral divergence residual)."""
        d = self.div_b()
        return float(np.max(np.abs(d))) if d.size else 0.0

    def with_solenoidal_b(self) -> "State":
        hat = self.hat.copy()
        hat[B1:] = sp.leray(self.grid, self.hat[B1:])
        return State(self.grid, hat)

    def dealiased(self) -> "State":
        return State(self.grid, sp.dealias(self.grid, self.hat))
