"""Minkowski four-vector algebra.

Metric signature (+, -, -, -), natural units c = 1. Four-vectors are plain
``numpy`` arrays of shape ``(4,)`` holding contravariant components; covariant
components are produced on demand with :func:`lower_index`. Faraday tensors
are ``(4, 4)`` arrays with both indices down.
"""
import numpy as np

from .errors import NonTimelikeVelocity

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])


def four_vector(components):
    v = np.asarray(components, dtype=float)
    if v.shape != (4,):
        raise ValueError(f"four-vector needs 4 components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("four-vector components must be finite")
    return v


def minkowski_dot(a, b):
    """a^0 b^0 - a^1 b^1 - a^2 b^2 - a^3 b^3 (works on stacked (..., 4) arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3]


def lower_index(a):
    """Flip the sign of the spatial components. Applying it twice is the identity."""
    return np.asarray(a, dtype=float) * _SIGNS


raise_index = lower_index


def renormalize_velocity(u):
    """Scale a time-like vector onto the unit mass shell, u.u = 1."""
    u = np.asarray(u, dtype=float)
    norm2 = minkowski_dot(u, u)
    if not norm2 > 0.0:
        raise NonTimelikeVelocity(f"u.u = {norm2!r} is not positive")
    return u / np.sqrt(norm2)


def velocity_from_three(v):
    """Four-velocity (gamma, gamma v) of a three-velocity with |v| < 1."""
    v = np.asarray(v, dtype=float)
    v2 = float(v @ v)
    if v2 >= 1.0:
        raise NonTimelikeVelocity(f"|v|^2 = {v2} >= 1")
    g = 1.0 / np.sqrt(1.0 - v2)
    return np.concatenate([[g], g * v])


def velocity_from_spatial(u3):
    """Four-velocity with spatial part ``u3`` on the unit mass shell."""
    u3 = np.asarray(u3, dtype=float)
    return np.concatenate([[np.sqrt(1.0 + u3 @ u3)], u3])


def faraday(E=(0.0, 0.0, 0.0), B=(0.0, 0.0, 0.0)):
    """Covariant F_{mu nu} for given E and B.

    With A_mu = (phi, -A), F_{0i} = E_i and F_{ij} = -eps_{ijk} B_k.
    """
    Ex, Ey, Ez = np.asarray(E, dtype=float)
    Bx, By, Bz = np.asarray(B, dtype=float)
    return np.array([
        [0.0, Ex, Ey, Ez],
        [-Ex, 0.0, -Bz, By],
        [-Ey, Bz, 0.0, -Bx],
        [-Ez, -By, Bx, 0.0],
    ])


def antisymmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def is_antisymmetric(F):
    F = np.asarray(F)
    return bool(np.array_equal(F, -np.swapaxes(F, -1, -2)))


def wedge(a, b):
    """Antisymmetric outer product a_mu b_k - a_k b_mu."""
    return np.outer(a, b) - np.outer(b, a)


def boost_matrix(U):
    """Lorentz boost taking (1, 0, 0, 0) to the unit time-like vector ``U``."""
    U = renormalize_velocity(U)
    g = U[0]
    w = U[1:]
    L = np.empty((4, 4))
    L[0, 0] = g
    L[0, 1:] = w
    L[1:, 0] = w
    L[1:, 1:] = np.eye(3) + np.outer(w, w) / (1.0 + g)
    return L


def projector(U):
    """Delta^{mu nu} = eta^{mu nu} - U^mu U^nu (both indices up)."""
    U = np.asarray(U, dtype=float)
    return ETA - np.outer(U, U)
