"""Self-interaction of a charged spherical shell.

Every force returned here is covariant (index down) and in force units, i.e.
the right-hand side of m0 du_mu/ds = q F^ext_{mu nu} u^nu + G_mu. Potentials
are covariant as well.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory
from .geometry import lower_index, minkowski_dot, raise_index
from .history import find_retarded_time


class SelfForceModel(str, enum.Enum):
    EXACT = "exact"
    RETARDED_HAMILTONIAN = "retarded_hamiltonian"
    PRESENT_TIME = "present_time"
    LL = "ll"
    NONE = "none"


@dataclass(frozen=True)
class ParticleParams:
    q: float
    m0: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not self.m0 > 0:
            raise ValueError("m0 must be > 0")

    @property
    def m_em(self):
        """Leading-order electromagnetic mass q^2 / sigma."""
        return self.q * self.q / self.sigma


@dataclass
class RetardedPoint:
    s_ret: float          # delay s - s'
    s_prime: float
    r: np.ndarray         # r(s')
    u: np.ndarray         # u(s')
    a: np.ndarray         # du/ds at s'
    R: np.ndarray         # r(s) - r(s'), contravariant


def retarded_point(history, s, sigma, r_now=None, guess=None):
    if r_now is None:
        r_now = history.interpolate(s).r
    sp = find_retarded_time(history, s, sigma, r_now=r_now, guess=guess)
    smp = history.interpolate(sp)
    return RetardedPoint(s - sp, sp, smp.r, smp.u, smp.a, np.asarray(r_now) - smp.r)


# -- exact retarded quantities ----------------------------------------------

def self_potential_exact(history, s, params, r_now=None):
    """q u_mu(s') / |R.u(s')| at the causal retarded point."""
    if params.q == 0.0:
        return np.zeros(4)
    p = retarded_point(history, s, params.sigma, r_now)
    return params.q * lower_index(p.u) / abs(minkowski_dot(p.R, p.u))


def faraday_from_retarded(point, q):
    """F^self_{mu k} = -2q / |R.U| d/ds' [(U_mu R_k - U_k R_mu) / R.U] at s'.

    The s'-derivative is expanded analytically with dU/ds' = a and
    dR/ds' = -U (s held fixed).
    """
    U = lower_index(point.u)
    R = lower_index(point.R)
    A = lower_index(point.a)
    D = minkowski_dot(point.R, point.u)
    dD = -minkowski_dot(point.u, point.u) + minkowski_dot(point.R, point.a)
    X_num = np.outer(U, R) - np.outer(R, U)
    dX_num = np.outer(A, R) - np.outer(R, A)
    dX = dX_num / D - X_num * (dD / (D * D))
    return (-2.0 * q / abs(D)) * dX


def self_faraday_exact(history, s, params, r_now=None):
    if params.q == 0.0:
        return np.zeros((4, 4))
    p = retarded_point(history, s, params.sigma, r_now)
    return faraday_from_retarded(p, params.q)


def self_force_exact(history, s, params, r_now=None, u_now=None):
    """G_mu = q F^self_{mu k} u^k(s)."""
    if params.q == 0.0:
        return np.zeros(4)
    if r_now is None or u_now is None:
        here = history.interpolate(s)
        r_now = here.r if r_now is None else r_now
        u_now = here.u if u_now is None else u_now
    F = self_faraday_exact(history, s, params, r_now)
    return params.q * (F @ u_now)


# -- short-delay asymptotic models -------------------------------------------

def _transverse(u, v):
    """v - u (u.v): the part of v orthogonal to a unit time-like u."""
    return v - u * minkowski_dot(u, v)


def retarded_hamiltonian_force(u, a, adot, params, include_mass=True):
    """-m_EM a(s') - (1/3) q^2 [adot - u (u.adot)] from quantities at s'."""
    g = -(params.q ** 2 / 3.0) * _transverse(u, adot)
    if include_mass:
        g = g - params.m_em * a
    return lower_index(g)


def present_time_force(u, a, adot, params, include_mass=True):
    """-(q^2/sigma) a(s) + (2/3) q^2 [adot - u (u.adot)] from quantities at s."""
    g = (2.0 * params.q ** 2 / 3.0) * _transverse(u, adot)
    if include_mass:
        g = g - params.m_em * a
    return lower_index(g)


def acceleration_derivative(history, s, h=None):
    """d a / ds at ``s``: central difference when s + h is stored, else 3-point backward."""
    if h is None:
        h = history.step
        if not h > 0:
            raise InsufficientHistory("need at least two stored samples to difference the acceleration")
    if s + h <= history.frontier:
        return (history.interpolate(s + h).a - history.interpolate(s - h).a) / (2.0 * h)
    if s > history.frontier:
        raise InsufficientHistory(f"s={s} lies beyond the stored history")
    a0 = history.interpolate(s).a
    a1 = history.interpolate(s - h).a
    a2 = history.interpolate(s - 2.0 * h).a
    return (3.0 * a0 - 4.0 * a1 + a2) / (2.0 * h)


def self_force_retarded_hamiltonian(history, s, params, r_now=None, include_mass=True, h=None):
    p = retarded_point(history, s, params.sigma, r_now)
    if h is None:
        h = history.step
        if not h > 0:
            # history holds the initial sample only: s' lies in the inertial prehistory
            h = params.sigma / 4.0
    if p.s_prime + h > history.frontier:
        raise InsufficientHistory(f"retarded point s'={p.s_prime} is within one step of the frontier")
    adot = acceleration_derivative(history, p.s_prime, h)
    return retarded_hamiltonian_force(p.u, p.a, adot, params, include_mass)


def self_force_present_time(history, s, params, include_mass=True, h=None):
    if len(history) < 2 and h is None:
        raise InsufficientHistory("present-time model needs at least two stored samples")
    here = history.interpolate(s)
    adot = acceleration_derivative(history, s, h)
    return present_time_force(here.u, here.a, adot, params, include_mass)


# -- Landau-Lifshitz iterated local model ------------------------------------

def ll_h1_terms(F, dF, U, q, m0):
    """The three terms of h^(1)_mu (covariant), returned separately.

    Signs follow from iterating DU^nu/Ds = (q/m0) F^{nu mu} U_mu once, which
    makes h^(1) exactly orthogonal to U.
    """
    FU = F @ U                                   # F_{k l} U^l
    grad = np.einsum("lmn,n,l->m", dF, U, U)     # d_l F_{mu nu} U^nu U^l
    ff = (q / m0) * (F @ raise_index(FU))        # F_{mu nu} F^{nu l} U_l
    proj = (q / m0) * minkowski_dot(FU, FU) * lower_index(U)
    return grad, ff, proj


def ll_h1(F, dF, U, q, m0):
    grad, ff, proj = ll_h1_terms(F, dF, U, q, m0)
    return grad + ff + proj


def ll_per_unit_mass(F, dF, U, q, m0, sigma, pressure_force=None, h2=None, include_mass=True):
    """(q^2/m0) { -(1/sigma)[(q/m0) F U - pressure_force] + (2q/3m0) h1 + (2/3) h2 }."""
    body = (2.0 * q / (3.0 * m0)) * ll_h1(F, dF, U, q, m0)
    if include_mass:
        drive = (q / m0) * (F @ U)
        if pressure_force is not None:
            drive = drive - pressure_force
        body = -(1.0 / sigma) * drive + body
    if h2 is not None:
        body = body + (2.0 / 3.0) * h2
    return (q * q / m0) * body


def self_force_ll_iterative(field_model, r, u, params, include_mass=True):
    """Local LL-type self-force from the external field at ``r``; no history needed."""
    F = field_model.faraday(r)
    dF = field_model.faraday_gradient(r)
    return params.m0 * ll_per_unit_mass(F, dF, np.asarray(u, dtype=float), params.q, params.m0,
                                        params.sigma, include_mass=include_mass)


# -- canonical structure -----------------------------------------------------

def effective_momentum(u, A_ext, A_self, params):
    """P_mu = m0 u_mu + q (A^ext_mu + 2 A^self_mu), potentials covariant."""
    return params.m0 * lower_index(u) + params.q * (np.asarray(A_ext) + 2.0 * np.asarray(A_self))


def kinetic_momentum(u, A_ext, A_self, params):
    """p_mu = m0 u_mu + q (A^ext_mu + A^self_mu): the single-weight canonical momentum."""
    return params.m0 * lower_index(u) + params.q * (np.asarray(A_ext) + np.asarray(A_self))


def effective_hamiltonian(P, A_ext, A_self, params):
    """(1/2m0) (P - q A_eff).(P - q A_eff) with A_eff = A_ext + 2 A_self."""
    w = raise_index(np.asarray(P) - params.q * (np.asarray(A_ext) + 2.0 * np.asarray(A_self)))
    return minkowski_dot(w, w) / (2.0 * params.m0)
