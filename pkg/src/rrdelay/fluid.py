"""Fluid-level asymptotic self-force along Lagrangian paths.

Fluid fields are analytic callbacks: U^mu(r), n(r) and the pressure tensor
P^{mu nu}(r), each with first and second coordinate gradients. Gradient arrays
put the derivative index first: dU[l, mu] = d_l U^mu, dP[l, mu, nu], and so on.
Vectors are contravariant unless a function says otherwise.
"""
import json

import numpy as np

from . import selfforce as sf
from .errors import DomainError, InsufficientHistory
from .geometry import ETA, lower_index, minkowski_dot, projector, raise_index
from .history import find_retarded_time


def _fd4(f, r, h):
    """4th-order central differences of f along each coordinate; index 0 is the derivative."""
    r = np.asarray(r, dtype=float)
    out = []
    for l in range(4):
        e = np.zeros(4)
        e[l] = h
        out.append((-f(r + 2 * e) + 8 * f(r + e) - 8 * f(r - e) + f(r - 2 * e)) / (12.0 * h))
    return np.array(out)


class FluidCallbacks:
    """Base class: override U, n, P and any gradients known in closed form.

    Missing gradients fall back to 4th-order finite differences with step ``fd_step``.
    """

    fd_step = 1e-3
    n_min = 1e-12

    def U(self, r):
        raise NotImplementedError

    def n(self, r):
        raise NotImplementedError

    def P(self, r):
        return np.zeros((4, 4))

    def dU(self, r):
        return _fd4(self.U, r, self.fd_step)

    def d2U(self, r):
        return _fd4(self.dU, r, self.fd_step)

    def dn(self, r):
        return _fd4(lambda x: np.atleast_1d(self.n(x)), r, self.fd_step)[:, 0]

    def dP(self, r):
        return _fd4(self.P, r, self.fd_step)

    def d2P(self, r):
        return _fd4(self.dP, r, self.fd_step)

    def density(self, r):
        n = float(self.n(r))
        if not n > self.n_min:
            raise DomainError(f"fluid density {n!r} at {r} is not bounded away from zero")
        return n


class UniformFluid(FluidCallbacks):
    """Constant U, n and isotropic pressure -p Delta."""

    def __init__(self, U=(1.0, 0.0, 0.0, 0.0), n=1.0, p=0.0):
        self._U = np.asarray(U, dtype=float)
        self._n = float(n)
        self._P = -float(p) * projector(self._U)

    def U(self, r):
        return self._U.copy()

    def n(self, r):
        return self._n

    def P(self, r):
        return self._P.copy()

    def dU(self, r):
        return np.zeros((4, 4))

    def d2U(self, r):
        return np.zeros((4, 4, 4))

    def dn(self, r):
        return np.zeros(4)

    def dP(self, r):
        return np.zeros((4, 4, 4))

    def d2P(self, r):
        return np.zeros((4, 4, 4, 4))


class ShearFlow(FluidCallbacks):
    """Plane shear: spatial velocity u^x = k y, uniform density, no pressure."""

    def __init__(self, k=1.0, n=1.0):
        self.k = float(k)
        self._n = float(n)

    def U(self, r):
        w = self.k * r[2]
        return np.array([np.sqrt(1.0 + w * w), w, 0.0, 0.0])

    def dU(self, r):
        w = self.k * r[2]
        g = np.sqrt(1.0 + w * w)
        d = np.zeros((4, 4))
        d[2] = [self.k * w / g, self.k, 0.0, 0.0]
        return d

    def d2U(self, r):
        w = self.k * r[2]
        g = np.sqrt(1.0 + w * w)
        d = np.zeros((4, 4, 4))
        d[2, 2, 0] = self.k ** 2 / g ** 3
        return d

    def n(self, r):
        return self._n

    def dn(self, r):
        return np.zeros(4)

    def dP(self, r):
        return np.zeros((4, 4, 4))

    def d2P(self, r):
        return np.zeros((4, 4, 4, 4))


class RigidRotation(FluidCallbacks):
    """Rigid rotation about z: spatial velocity Omega (-y, x, 0); LPs are circles."""

    def __init__(self, omega=1.0, n=1.0):
        self.omega = float(omega)
        self._n = float(n)

    def U(self, r):
        x, y = r[1], r[2]
        w = self.omega
        return np.array([np.sqrt(1.0 + w * w * (x * x + y * y)), -w * y, w * x, 0.0])

    def dU(self, r):
        x, y = r[1], r[2]
        w = self.omega
        g = np.sqrt(1.0 + w * w * (x * x + y * y))
        d = np.zeros((4, 4))
        d[1] = [w * w * x / g, 0.0, w, 0.0]
        d[2] = [w * w * y / g, -w, 0.0, 0.0]
        return d

    def d2U(self, r):
        x, y = r[1], r[2]
        w2 = self.omega ** 2
        g = np.sqrt(1.0 + w2 * (x * x + y * y))
        d = np.zeros((4, 4, 4))
        d[1, 1, 0] = w2 / g - w2 * w2 * x * x / g ** 3
        d[2, 2, 0] = w2 / g - w2 * w2 * y * y / g ** 3
        d[1, 2, 0] = d[2, 1, 0] = -w2 * w2 * x * y / g ** 3
        return d

    def n(self, r):
        return self._n

    def dn(self, r):
        return np.zeros(4)

    def dP(self, r):
        return np.zeros((4, 4, 4))

    def d2P(self, r):
        return np.zeros((4, 4, 4, 4))


class IsothermalMaxwellian(FluidCallbacks):
    """Uniform U with quadratic density n(r) = n0 + g.r + r.H.r/2 and P = -n T Delta."""

    def __init__(self, U=(1.0, 0.0, 0.0, 0.0), T=1.0, n0=1.0, grad=(0.0, 0.0, 0.0, 0.0), hess=None):
        self._U = np.asarray(U, dtype=float)
        self.T = float(T)
        self.n0 = float(n0)
        self.g = np.asarray(grad, dtype=float)
        self.H = np.zeros((4, 4)) if hess is None else np.asarray(hess, dtype=float)
        self.H = 0.5 * (self.H + self.H.T)
        self._delta = projector(self._U)

    def U(self, r):
        return self._U.copy()

    def dU(self, r):
        return np.zeros((4, 4))

    def d2U(self, r):
        return np.zeros((4, 4, 4))

    def n(self, r):
        r = np.asarray(r, dtype=float)
        return self.n0 + self.g @ r + 0.5 * r @ self.H @ r

    def dn(self, r):
        return self.g + self.H @ np.asarray(r, dtype=float)

    def P(self, r):
        return -self.n(r) * self.T * self._delta

    def dP(self, r):
        return -self.T * np.einsum("l,mn->lmn", self.dn(r), self._delta)

    def d2P(self, r):
        return -self.T * np.einsum("lk,mn->lkmn", self.H, self._delta)


CATALOGUE = {
    "uniform": UniformFluid,
    "shear": ShearFlow,
    "rotation": RigidRotation,
    "isothermal": IsothermalMaxwellian,
}


# -- convective derivatives ----------------------------------------------------

def convective_derivatives(cb, r):
    """(U, DU/Ds, D^2U/Ds^2) at r from the callback field, with D = U^l d_l."""
    U = cb.U(r)
    dU = cb.dU(r)
    d2U = cb.d2U(r)
    DU = U @ dU
    D2U = np.einsum("l,lm,mk->k", U, dU, dU) + np.einsum("l,m,lmk->k", U, U, d2U)
    return U, DU, D2U


def pressure_divergence(cb, r):
    """d_mu P^{mu nu} (contravariant nu)."""
    return np.einsum("mmn->n", cb.dP(r))


def _pressure_divergence_gradient(cb, r):
    """d_l d_mu P^{mu nu}, shape (l, nu)."""
    return np.einsum("lmmn->ln", cb.d2P(r))


# -- present- and retarded-time expansions -------------------------------------

def fluid_self_potential_present(U, DU, sigma, q):
    """q [U_mu / sigma - DU_mu/Ds] (covariant)."""
    return q * lower_index(np.asarray(U) / sigma - np.asarray(DU))


def fluid_self_force_present(U, DU, D2U, sigma, q, m0):
    """Present-time fluid self-force per unit mass, covariant.

    -(q^2 / sigma m0) DU_mu + (2/3)(q^2/m0)[D^2U_mu - U_mu U^k D^2U_k]
    """
    U = np.asarray(U, dtype=float)
    D2U = np.asarray(D2U, dtype=float)
    k = -(q * q / (sigma * m0)) * np.asarray(DU) + (2.0 * q * q / (3.0 * m0)) * (D2U - U * minkowski_dot(U, D2U))
    return lower_index(k)


def _retarded_force_at(U, DU, D2U, sigma, q, m0):
    U = np.asarray(U, dtype=float)
    D2U = np.asarray(D2U, dtype=float)
    k = -(q * q / (sigma * m0)) * np.asarray(DU) - (q * q / (3.0 * m0)) * (D2U - U * minkowski_dot(U, D2U))
    return lower_index(k)


def lagrangian_path_back(cb, r, delay, steps=64):
    """Integrate dX/ds = U(X) backwards by ``delay`` with RK4; returns X(s - delay)."""
    x = np.asarray(r, dtype=float)
    h = -delay / steps
    for _ in range(steps):
        k1 = cb.U(x)
        k2 = cb.U(x + 0.5 * h * k1)
        k3 = cb.U(x + 0.5 * h * k2)
        k4 = cb.U(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def fluid_self_force_retarded(cb, r, sigma, q, m0, history=None, s=None):
    """Retarded-time leading forms at s' for the fluid element now at r.

    Returns (A_self at s', K at s'), both covariant. With ``history`` (the LP as a
    stored world-line) s' solves the light-cone condition at ``s``; otherwise
    the LP is traced back through the callbacks by the leading delay sigma.
    """
    if history is not None:
        if s is None:
            raise ValueError("s is required together with history")
        sp = find_retarded_time(history, s, sigma, r_now=np.asarray(r, dtype=float))
        if sp < history.s0:
            smp = history.interpolate(sp)
            U, DU, D2U = smp.u, smp.a, np.zeros(4)
        else:
            smp = history.interpolate(sp)
            h = history.step
            if sp - h < history.s0 or sp + h > history.frontier:
                raise InsufficientHistory(f"LP history does not bracket s'={sp}")
            D2U = sf.acceleration_derivative(history, sp, h)
            U, DU = smp.u, smp.a
    else:
        xp = lagrangian_path_back(cb, r, sigma)
        U, DU, D2U = convective_derivatives(cb, xp)
    return (q / sigma) * lower_index(U), _retarded_force_at(U, DU, D2U, sigma, q, m0)


# -- LL-iterated fluid force ---------------------------------------------------

def ll_iterated_acceleration(cb, field_model, r, params):
    """Iterated D^2U^nu/Ds^2 (contravariant) with its per-term breakdown.

    DU/Ds = F U - (1/n) d_mu P^{mu nu} with F = (q/m0) F_ext is differentiated
    once more along the path and DU/Ds is substituted again.
    """
    q, m0 = params.q, params.m0
    r = np.asarray(r, dtype=float)
    U = cb.U(r)
    n = cb.density(r)
    dlnn = cb.dn(r) / n
    Fc = (q / m0) * field_model.faraday(r)             # F_{mu nu}
    dFc = (q / m0) * field_model.faraday_gradient(r)    # d_l F_{mu nu}
    Fm = ETA @ Fc                                       # F^mu_nu
    divP = pressure_divergence(cb, r)                   # d_mu P^{mu nu}
    ddivP = _pressure_divergence_gradient(cb, r)        # d_l d_mu P^{mu nu}
    terms = {
        "field_gradient": ETA @ np.einsum("lmk,k,l->m", dFc, U, U),
        "field_field": Fm @ (Fm @ U),
        "field_pressure": -Fm @ (divP / n),
        "pressure_log_density": (divP / n) * (U @ dlnn),
        "pressure_second_gradient": -(U @ ddivP) / n,
    }
    total = sum(terms.values())
    return total, terms


def ll_h2(cb, field_model, r, params):
    """h^(2)_mu (covariant) and its six terms; every term carries a pressure gradient."""
    q, m0 = params.q, params.m0
    r = np.asarray(r, dtype=float)
    U = cb.U(r)
    Ul = lower_index(U)
    n = cb.density(r)
    dlnn = cb.dn(r) / n
    F = field_model.faraday(r)                                  # F_{mu nu}
    divP = pressure_divergence(cb, r)                           # d_l P^{l beta}
    divP_low = lower_index(divP)                                # d_nu P_mu^nu
    ddivP_low = lower_index(U @ _pressure_divergence_gradient(cb, r))   # U^l d_l d_nu P_mu^nu
    FdP = F @ divP                                              # F_{mu beta} d_l P^{l beta}
    Dlnn = U @ dlnn
    t = {
        "t1": -(q / m0) / n * FdP,
        "t2": (divP_low / n) * Dlnn,
        "t3": -ddivP_low / n,
        "t4": (q / m0) / n * Ul * (U @ FdP),
        "t5": -(Ul / n) * (U @ divP_low) * Dlnn,
        "t6": (Ul / n) * (U @ ddivP_low),
    }
    h2 = t["t1"] + t["t2"] + t["t3"] + t["t4"] + t["t5"] + t["t6"]
    return h2, t


def fluid_ll_force(cb, field_model, r, params, include_mass=True, breakdown=False):
    """Fluid LL self-force per unit mass K_mu (covariant).

    (q^2/m0){-(1/sigma)[(q/m0) F U - (1/n) d_nu P_mu^nu] + (2q/3m0) h1 + (2/3) h2}
    With ``breakdown`` also returns a dict holding h1, h2 and their terms.
    """
    q, m0 = params.q, params.m0
    r = np.asarray(r, dtype=float)
    U = cb.U(r)
    n = cb.density(r)
    F = field_model.faraday(r)
    dF = field_model.faraday_gradient(r)
    pressure_force = lower_index(pressure_divergence(cb, r)) / n
    h2, h2_terms = ll_h2(cb, field_model, r, params)
    K = sf.ll_per_unit_mass(F, dF, U, q, m0, params.sigma, pressure_force=pressure_force, h2=h2,
                            include_mass=include_mass)
    if not breakdown:
        return K
    grad, ff, proj = sf.ll_h1_terms(F, dF, U, q, m0)
    info = {
        "K": K,
        "h1": grad + ff + proj,
        "h1_terms": {"field_gradient": grad, "field_field": ff, "projection": proj},
        "h2": h2,
        "h2_terms": h2_terms,
        "pressure_force": pressure_force,
    }
    return K, info


def breakdown_json(cb, field_model, r, params):
    """Term-by-term fluid LL breakdown as JSON text."""
    _, info = fluid_ll_force(cb, field_model, r, params, breakdown=True)
    D2U, d2u_terms = ll_iterated_acceleration(cb, field_model, r, params)

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        return [float(x) for x in np.asarray(v).ravel()]

    doc = {"r": clean(np.asarray(r, dtype=float)), "fluid_ll": clean(info),
           "iterated_D2U": clean(D2U), "iterated_D2U_terms": clean(d2u_terms)}
    return json.dumps(doc, indent=2, sort_keys=True)


def flux_derivative_oracle(cb, field_model, r, params, eps=1e-5):
    """Finite-difference D^2U/Ds^2 using DU/Ds = F U - (1/n) div P along the path."""
    q, m0 = params.q, params.m0

    def A(x, U):
        return (q / m0) * raise_index(field_model.faraday(x) @ U) - pressure_divergence(cb, x) / cb.density(x)

    r = np.asarray(r, dtype=float)
    U = cb.U(r)
    a = A(r, U)
    # 4th-order central difference of eps -> A(r + eps U, U + eps a)
    vals = {k: A(r + k * eps * U, U + k * eps * a) for k in (-2, -1, 1, 2)}
    return (-vals[2] + 8 * vals[1] - 8 * vals[-1] + vals[-2]) / (12.0 * eps)
