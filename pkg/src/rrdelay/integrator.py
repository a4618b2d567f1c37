"""Method-of-steps integration of the delay-type radiation-reaction equation.

Because the retarded point trails the present by ~sigma >= 4h, every delayed
quantity a stage needs is already stored in the history, so an explicit RK4
in (r, u) is legitimate; the self-force enters as a known source.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import selfforce as sf
from .errors import IntegrationError, RRError
from .fields import ExternalFieldModel, ZeroField
from .geometry import lower_index, minkowski_dot, raise_index, renormalize_velocity, velocity_from_spatial
from .history import WorldlineHistory, WorldlineSample, find_retarded_time
from .selfforce import ParticleParams, SelfForceModel

HISTORY_MODELS = (SelfForceModel.EXACT, SelfForceModel.RETARDED_HAMILTONIAN, SelfForceModel.PRESENT_TIME)


@dataclass(frozen=True)
class IntegratorConfig:
    h: float
    span: float
    model: SelfForceModel = SelfForceModel.NONE
    field: ExternalFieldModel = field(default_factory=ZeroField)
    constraint: str = "projection"
    renormalize_mass: bool = False
    tol_root: float = 1e-12
    max_lookback: float = None

    def __post_init__(self):
        object.__setattr__(self, "model", SelfForceModel(self.model))
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if not (np.isfinite(self.span) and self.span >= 0):
            raise ValueError("span must be finite and >= 0")
        if self.constraint not in ("projection", "none"):
            raise ValueError("constraint must be 'projection' or 'none'")

    def check(self, params):
        if self.h > params.sigma / 4.0 * (1 + 1e-12):
            raise ValueError(f"step h={self.h} exceeds sigma/4={params.sigma / 4.0}")

    @property
    def n_steps(self):
        return int(round(self.span / self.h))


@dataclass
class Diagnostics:
    s: list = field(default_factory=list)
    uu_drift: list = field(default_factory=list)
    ext_force: list = field(default_factory=list)
    self_force: list = field(default_factory=list)
    self_power: list = field(default_factory=list)

    def record(self, s, u, f_ext, f_self):
        self.s.append(s)
        self.uu_drift.append(minkowski_dot(u, u) - 1.0)
        self.ext_force.append(float(np.linalg.norm(f_ext)))
        self.self_force.append(float(np.linalg.norm(f_self)))
        # energy exchanged with the self-field: dE/ds = G^0
        self.self_power.append(float(raise_index(f_self)[0]))

    def arrays(self):
        return {k: np.asarray(v) for k, v in self.__dict__.items()}

    def self_work(self):
        """Trapezoidal integral of G^0 over s."""
        s = np.asarray(self.s)
        p = np.asarray(self.self_power)
        if len(s) < 2:
            return 0.0
        return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(s)))


@dataclass
class RunResult:
    history: WorldlineHistory
    diagnostics: Diagnostics
    params: ParticleParams
    config: IntegratorConfig


class Integrator:
    def __init__(self, config, params):
        config.check(params)
        self.config = config
        self.params = params
        self.model = config.model
        self._last_delay = None
        self._adot_frontier = np.zeros(4)
        renorm = config.renormalize_mass and self.model in (SelfForceModel.RETARDED_HAMILTONIAN, SelfForceModel.LL)
        self._include_mass = not renorm
        self.inertial_mass = params.m0 + (params.m_em if renorm else 0.0)

    # -- forces ---------------------------------------------------------------
    def forces(self, s, r, u, history):
        """(external, self) covariant forces at a stage."""
        p = self.params
        F = self.config.field.faraday(r)
        f_ext = p.q * (F @ u)
        m = self.model
        if m is SelfForceModel.NONE or p.q == 0.0:
            return f_ext, np.zeros(4)
        if m is SelfForceModel.EXACT:
            pt = self._retarded(history, s, r)
            return f_ext, p.q * (sf.faraday_from_retarded(pt, p.q) @ u)
        if m is SelfForceModel.RETARDED_HAMILTONIAN:
            pt = self._retarded(history, s, r)
            h = self.config.h
            adot = sf.acceleration_derivative(history, pt.s_prime, h)
            return f_ext, sf.retarded_hamiltonian_force(pt.u, pt.a, adot, p, self._include_mass)
        if m is SelfForceModel.PRESENT_TIME:
            # -m_EM a(s) is moved to the left-hand side; the bracket uses the
            # acceleration derivative at the frontier, frozen over the step.
            g = sf.present_time_force(u, np.zeros(4), self._adot_frontier, p, include_mass=False)
            a_cov = (f_ext + g) / (p.m0 + p.m_em)
            return f_ext, g - p.m_em * a_cov
        if m is SelfForceModel.LL:
            return f_ext, sf.self_force_ll_iterative(self.config.field, r, u, p, self._include_mass)
        raise ValueError(f"unknown model {m}")

    def _retarded(self, history, s, r):
        guess = self._last_delay
        sp = find_retarded_time(history, s, self.params.sigma, r_now=r, tol=self.config.tol_root, guess=guess)
        self._last_delay = s - sp
        smp = history.interpolate(sp)
        return sf.RetardedPoint(s - sp, sp, smp.r, smp.u, smp.a, r - smp.r)

    def acceleration(self, s, r, u, history):
        f_ext, f_self = self.forces(s, r, u, history)
        # for the present-time model f_self already carries -m_EM a, so m0 is the inertia
        m = self.params.m0 if self.model is SelfForceModel.PRESENT_TIME else self.inertial_mass
        return raise_index((f_ext + f_self) / m), f_ext, f_self

    # -- stepping -------------------------------------------------------------
    def start(self, s0, r0, u0, prehistory_velocity=None):
        r0 = np.asarray(r0, dtype=float)
        u0 = np.asarray(u0, dtype=float)
        if self.config.constraint == "projection":
            u0 = renormalize_velocity(u0)
        pre = u0 if prehistory_velocity is None else np.asarray(prehistory_velocity, dtype=float)
        hist = WorldlineHistory(s0, r0, pre, capacity=self.config.n_steps + 2, max_lookback=self.config.max_lookback)
        a0, f_ext, f_self = self.acceleration(s0, r0, u0, hist)
        hist.append(WorldlineSample(float(s0), r0, u0, a0))
        return hist, (f_ext, f_self)

    def step(self, state, history):
        """Advance ``state`` (the history frontier) by one step and append the result."""
        h = self.config.h
        s, r, u, a = state.s, state.r, state.u, state.a
        if self.model is SelfForceModel.PRESENT_TIME:
            self._adot_frontier = sf.acceleration_derivative(history, s, h)
        k1r, k1u = u, a
        k2r = u + 0.5 * h * k1u
        k2u = self.acceleration(s + 0.5 * h, r + 0.5 * h * k1r, k2r, history)[0]
        k3r = u + 0.5 * h * k2u
        k3u = self.acceleration(s + 0.5 * h, r + 0.5 * h * k2r, k3r, history)[0]
        k4r = u + h * k3u
        k4u = self.acceleration(s + h, r + h * k3r, k4r, history)[0]
        r_new = r + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        u_new = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        if self.config.constraint == "projection":
            u_new = renormalize_velocity(u_new)
        s_new = s + h
        a_new, f_ext, f_self = self.acceleration(s_new, r_new, u_new, history)
        new = WorldlineSample(s_new, r_new, u_new, a_new)
        history.append(new)
        return new, (f_ext, f_self)

    def run(self, r0, u0, s0=0.0, prehistory_velocity=None, diagnostics=True, observer=None):
        hist, forces = self.start(s0, r0, u0, prehistory_velocity)
        diag = Diagnostics()
        state = hist.last()
        if diagnostics:
            diag.record(state.s, state.u, *forces)
        for k in range(1, self.config.n_steps + 1):
            try:
                state, forces = self.step(state, hist)
            except RRError as exc:
                raise IntegrationError(state.s, exc) from exc
            # keep the proper-time grid free of accumulated round-off
            if state.s != s0 + k * self.config.h:
                hist._s[hist._hi - 1] = s0 + k * self.config.h
                state.s = s0 + k * self.config.h
            if diagnostics:
                diag.record(state.s, state.u, *forces)
            if observer is not None:
                observer(state, forces)
        return RunResult(hist, diag, self.params, self.config)


def step(state, history, config, params):
    """One RK4 step of the delay equation; returns the appended sample."""
    return Integrator(config, params).step(state, history)[0]


def run_scenario(r0, u0, config, params, s0=0.0, prehistory_velocity=None, observer=None):
    """Integrate from an inertial prehistory over ``config.span``."""
    return Integrator(config, params).run(r0, u0, s0, prehistory_velocity, observer=observer)


# -- phase-space volume ------------------------------------------------------

def _self_potential_at(result, s):
    p = result.params
    if result.config.model is SelfForceModel.EXACT:
        return sf.self_potential_exact(result.history, s, p)
    return np.zeros(4)


def canonical_coordinates(result, s):
    """(r^mu, P_mu) at ``s``; P carries the doubled exact self-potential for the exact model."""
    smp = result.history.interpolate(s) if s != result.history.frontier else result.history.last()
    A_ext = result.config.field.potential(smp.r)
    A_self = _self_potential_at(result, s)
    return np.concatenate([smp.r, sf.effective_momentum(smp.u, A_ext, A_self, result.params)])


def velocity_from_canonical(r, P, field_model, params, model):
    """Invert P_mu at s0 for a world-line that was inertial with velocity u before s0.

    With the exact model the prehistory self-potential is q u_mu / (sigma |u|),
    so P - q A_ext = (m0 + 2 m_EM / |u|) u.
    """
    w = raise_index(np.asarray(P) - params.q * field_model.potential(r))
    if SelfForceModel(model) is SelfForceModel.EXACT:
        wn = np.sqrt(minkowski_dot(w, w))
        un = (wn - 2.0 * params.m_em) / params.m0
        return w * (un / wn)
    return w / params.m0


def _fd_jacobian(fn, x0, delta):
    cols = []
    for i in range(len(x0)):
        e = np.zeros(len(x0))
        e[i] = delta
        cols.append((fn(x0 + e) - fn(x0 - e)) / (2.0 * delta))
    return np.array(cols).T


def liouville_series(r0, u0, config, params, delta=1e-5, checkpoints=None):
    """Determinant of d y(s) / d y0 in canonical coordinates y = (r, P) at checkpoints.

    Central differences over the 8 canonical directions (16 perturbed runs).
    The mass-shell projection is switched off: off-shell perturbations are
    part of the canonical phase space and the Hamiltonian flow keeps u.u fixed.
    """
    cfg = replace(config, constraint="none")
    model = cfg.model
    base = run_scenario(r0, u0, cfg, params)
    if checkpoints is None:
        checkpoints = [base.history.frontier]
    checkpoints = np.asarray(checkpoints, dtype=float)
    A_self0 = (params.q / params.sigma) * lower_index(u0) if model is SelfForceModel.EXACT else np.zeros(4)
    y0 = np.concatenate([r0, sf.effective_momentum(u0, cfg.field.potential(r0), A_self0, params)])

    def flow(y):
        u = velocity_from_canonical(y[:4], y[4:], cfg.field, params, model)
        res = run_scenario(y[:4], u, cfg, params)
        return np.concatenate([canonical_coordinates(res, s) for s in checkpoints])

    J = _fd_jacobian(flow, y0, delta)
    dets = np.array([np.linalg.det(J[8 * k:8 * (k + 1)]) for k in range(len(checkpoints))])
    return checkpoints, dets


def liouville_volume_check(r0, u0, config, params, delta=1e-5):
    """Canonical phase-space volume ratio |d y(s)/d y0| at the end of the span."""
    return float(liouville_series(r0, u0, config, params, delta)[1][-1])


def velocity_volume_series(r0, u0, config, params, delta=1e-6, checkpoints=None):
    """Determinant of the on-shell flow in (r^mu, u^i) coordinates (7 x 7).

    u^0 = sqrt(1 + |u|^2) is slaved to the spatial velocity, so the volume
    rate is the divergence of du^i/ds over the mass-shell tangent directions.
    """
    base = run_scenario(r0, u0, config, params)
    if checkpoints is None:
        checkpoints = [base.history.frontier]
    checkpoints = np.asarray(checkpoints, dtype=float)
    x0 = np.concatenate([r0, np.asarray(u0, dtype=float)[1:]])

    def flow(x):
        res = run_scenario(x[:4], velocity_from_spatial(x[4:]), config, params)
        out = []
        for s in checkpoints:
            smp = res.history.interpolate(s)
            out.append(np.concatenate([smp.r, smp.u[1:]]))
        return np.concatenate(out)

    J = _fd_jacobian(flow, x0, delta)
    dets = np.array([np.linalg.det(J[7 * k:7 * (k + 1)]) for k in range(len(checkpoints))])
    return checkpoints, dets, base


def total_ll_acceleration(field_model, r, u, params, include_mass=True):
    """Contravariant du/ds of the LL model: Lorentz plus LL self-force, over m0."""
    F = field_model.faraday(r)
    f = params.q * (F @ u) + sf.self_force_ll_iterative(field_model, r, u, params, include_mass)
    return raise_index(f / params.m0)


def velocity_divergence_ll(field_model, r, u, params, eps=1e-6):
    """sum_i d(du^i/ds)/du^i on the mass shell, by central differences."""
    if params.q == 0.0:
        return 0.0
    u3 = np.asarray(u, dtype=float)[1:]
    div = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        ap = total_ll_acceleration(field_model, r, velocity_from_spatial(u3 + e), params)
        am = total_ll_acceleration(field_model, r, velocity_from_spatial(u3 - e), params)
        div += (ap[1 + i] - am[1 + i]) / (2.0 * eps)
    return float(div)


def integrated_divergence(result, eps=1e-6):
    """Trapezoidal integral of the LL velocity divergence along a stored trajectory."""
    h = result.history
    vals = np.array([velocity_divergence_ll(result.config.field, h.r[i], h.u[i], result.params, eps)
                     for i in range(len(h))])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(h.s))])
    return h.s.copy(), vals, cum


# -- ensembles of local-model particles ----------------------------------------

def _batch_faraday(field_model, r):
    from .fields import UniformElectric, UniformMagnetic, ZeroField
    if isinstance(field_model, (UniformElectric, UniformMagnetic, ZeroField)):
        return np.broadcast_to(field_model.faraday(r[0]), (len(r), 4, 4))
    return np.array([field_model.faraday(x) for x in r])


def _batch_gradient(field_model, r):
    from .fields import UniformElectric, UniformMagnetic, ZeroField
    if isinstance(field_model, (UniformElectric, UniformMagnetic, ZeroField)):
        return np.zeros((len(r), 4, 4, 4))
    return np.array([field_model.faraday_gradient(x) for x in r])


_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])


def batch_acceleration(field_model, params, model, r, u, include_mass=True):
    """Contravariant du/ds for N particles at once (local models only)."""
    F = _batch_faraday(field_model, r)
    FU = np.einsum("nmk,nk->nm", F, u)
    f = params.q * FU
    model = SelfForceModel(model)
    if model is SelfForceModel.LL and params.q != 0.0:
        q, m0 = params.q, params.m0
        dF = _batch_gradient(field_model, r)
        grad = np.einsum("nlmk,nk,nl->nm", dF, u, u)
        ff = (q / m0) * np.einsum("nmk,nk->nm", F, FU * _SIGNS)
        fu2 = np.einsum("nk,nk->n", FU * _SIGNS, FU)
        proj = (q / m0) * fu2[:, None] * (u * _SIGNS)
        body = (2.0 * q / (3.0 * m0)) * (grad + ff + proj)
        if include_mass:
            body = -(1.0 / params.sigma) * ((q / m0) * FU) + body
        f = f + m0 * (q * q / m0) * body
    elif model is not SelfForceModel.NONE:
        raise ValueError("batched stepping supports the local models 'none' and 'll' only")
    return f * _SIGNS / params.m0


def evolve_ensemble(r0, u0, config, params, record_every=1):
    """RK4 for many independent particles under a local model.

    Returns (s, r, u, a) with shapes (K,), (K, N, 4), (K, N, 4), (K, N, 4).
    """
    config.check(params)
    h = config.h
    r = np.array(r0, dtype=float)
    u = np.array(u0, dtype=float)

    def acc(r, u):
        return batch_acceleration(config.field, params, config.model, r, u)

    def project(u):
        return u / np.sqrt(np.einsum("nk,nk->n", u * _SIGNS, u))[:, None]

    if config.constraint == "projection":
        u = project(u)
    a = acc(r, u)
    S, Rs, Us, As = [0.0], [r.copy()], [u.copy()], [a.copy()]
    for k in range(1, config.n_steps + 1):
        k1r, k1u = u, a
        k2r = u + 0.5 * h * k1u
        k2u = acc(r + 0.5 * h * k1r, k2r)
        k3r = u + 0.5 * h * k2u
        k3u = acc(r + 0.5 * h * k2r, k3r)
        k4r = u + h * k3u
        k4u = acc(r + h * k3r, k4r)
        r = r + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        if config.constraint == "projection":
            u = project(u)
        a = acc(r, u)
        if k % record_every == 0 or k == config.n_steps:
            S.append(k * h)
            Rs.append(r.copy())
            Us.append(u.copy())
            As.append(a.copy())
    return np.array(S), np.array(Rs), np.array(Us), np.array(As)
