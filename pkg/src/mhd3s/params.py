"""Small parameters of the scaled MHD system."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ScaleParams:
    """Mach number ``eps_m``, Alfvén number ``eps_a`` and related constants.

    Attributes:
        eps_m: Mach number, in (0, 1]
        eps_a: Alfvén number, in (0, eps_m)
        mu_lim: limiting ratio used by the limit system (>= 0)
        gamma: pressure-law exponent (> 1), p(ρ) = ρ^γ / γ
        n: Sobolev order of the theory (>= 3)
        region_c: constant c of the admissible region eps_a >= c eps_m^(1+1/(n-1))
    """

    eps_m: float
    eps_a: float
    mu_lim: float = 0.0
    gamma: float = 5.0 / 3.0
    n: int = 3
    region_c: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eps_m <= 1.0:
            raise ValueError(f"eps_m must lie in (0, 1], got {self.eps_m}")
        if not 0.0 < self.eps_a < self.eps_m:
            raise ValueError(f"eps_a must lie in (0, eps_m), got eps_a={self.eps_a}, eps_m={self.eps_m}")
        if self.mu_lim < 0.0 or self.mu_lim >= 1.0:
            raise ValueError(f"mu_lim must lie in [0, 1), got {self.mu_lim}")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.n < 3:
            raise ValueError(f"Sobolev order n must be at least 3, got {self.n}")

    @classmethod
    def from_nu(cls, eps_m: float, nu: float, **kw) -> "ScaleParams":
        """eps_a = eps_m^(1+nu)."""
        if nu <= 0:
            raise ValueError(f"nu must be positive, got {nu}")
        return cls(eps_m=eps_m, eps_a=eps_m ** (1.0 + nu), **kw)

    @property
    def mu(self) -> float:
        return self.eps_a / self.eps_m

    @property
    def nu(self) -> float:
        if self.eps_m == 1.0:
            return math.inf
        return math.log(1.0 / self.mu) / math.log(1.0 / self.eps_m)

    @property
    def in_scaling_region(self) -> bool:
        return self.eps_a >= self.region_c * self.eps_m ** (1.0 + 1.0 / (self.n - 1))

    def eps_ladder(self, j: int) -> float:
        """Geometric sequence eps_j = eps_m^(1 + nu - j nu) = eps_m mu^(1-j)."""
        if j == 0:
            return self.eps_a
        if j == 1:
            return self.eps_m
        return self.eps_m * self.mu ** (1 - j)

    def as_dict(self) -> dict:
        return {
            "eps_m": self.eps_m,
            "eps_a": self.eps_a,
            "mu": self.mu,
            "nu": self.nu,
            "mu_lim": self.mu_lim,
            "gamma": self.gamma,
            "n": self.n,
            "in_scaling_region": self.in_scaling_region,
        }
