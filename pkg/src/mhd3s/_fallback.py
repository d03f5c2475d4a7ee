"""Pure NumPy kernels; reference implementation for the compiled ``_kernels``."""

import numpy as np


def mode_propagate(U, lam, v, dt):
    """Apply exp(-i dt H) = U diag(exp(-i dt λ)) Uᵀ mode by mode.

    Args:
        U: (N, 7, 7) real orthogonal eigenvector matrices (columns)
        lam: (N, 7) real eigenvalues
        v: (7, N) complex coefficients
        dt: step (may be negative or fractional)

    Returns:
        (7, N) complex array.
    """
    w = np.einsum("nji,jn->ni", U, v)
    w *= np.exp(-1j * dt * lam)
    return np.einsum("nij,nj->in", U, w)


def mhd_pointwise(fields, gr, gu, gb, eps_m, eps_a, gamma):
    """Pointwise fluxes and velocity tendency of the non-stiff MHD terms.

    Args:
        fields: (7, P) physical r, u1..u3, b1..b3
        gr: (3, P) gradient of r
        gu: (3, 3, P) with gu[i, j] = ∂_j u_i
        gb: (3, 3, P) with gb[i, j] = ∂_j b_i

    Returns:
        (9, P): r·u (3 rows), velocity tendency (3 rows), u×b (3 rows).
    """
    r = fields[0]
    u = fields[1:4]
    b = fields[4:7]
    out = np.empty((9,) + r.shape)
    out[0:3] = r * u
    rho = 1.0 + eps_m * r
    inv_rho = 1.0 / rho
    # (a(eps_m r) - 1)/eps_m with a(s) = (1+s)^(gamma-2)
    am1 = np.expm1((gamma - 2.0) * np.log1p(eps_m * r)) / eps_m
    # (1/rho - 1)/eps_a = -r / (mu rho)
    coef = -(eps_m / eps_a) * r * inv_rho
    for i in range(3):
        adv = u[0] * gu[i, 0] + u[1] * gu[i, 1] + u[2] * gu[i, 2]
        mag = b[0] * gb[0, i] + b[1] * gb[1, i] + b[2] * gb[2, i]
        mag -= b[0] * gb[i, 0] + b[1] * gb[i, 1] + b[2] * gb[i, 2]
        alf = gb[i, 2] - gb[2, i]
        out[3 + i] = -adv - am1 * gr[i] - inv_rho * mag + coef * alf
    out[6] = u[1] * b[2] - u[2] * b[1]
    out[7] = u[2] * b[0] - u[0] * b[2]
    out[8] = u[0] * b[1] - u[1] * b[0]
    return out
