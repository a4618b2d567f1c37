"""Maxwell-Juttner sampling, Monte-Carlo fluid moments and moment-equation residuals."""
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, EmptyEnsemble, InsufficientSnapshots
from .geometry import ETA, boost_matrix, minkowski_dot

_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])


# -- modified Bessel functions of the second kind -------------------------------

def _upper_limit(nu, x):
    # beyond t_max the scaled integrand exp(-x (cosh t - 1) + nu t) is < 1e-300 of its peak
    t = max(1.0, math.asinh(max(nu, 1.0) / x) + 1.0)
    while x * (math.cosh(t) - 1.0) - nu * t < 700.0:
        t *= 1.5
    return t


def bessel_k_scaled(nu, x):
    """exp(x) K_nu(x) from the integral representation, by adaptive quadrature."""
    if not x > 0.0:
        raise DomainError(f"bessel_k needs x > 0, got {x!r}")
    nu = float(nu)
    t_max = _upper_limit(nu, x)
    # peak of the integrand sits near asinh(nu / x); splitting there helps quad
    t_peak = math.asinh(nu / x) if nu > 0 else 0.0
    pts = [p for p in (t_peak, 2.0 * t_peak) if 0.0 < p < t_max]

    def f(t):
        return math.exp(-x * (math.cosh(t) - 1.0)) * math.cosh(nu * t)

    val, _ = integrate.quad(f, 0.0, t_max, points=pts or None, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def bessel_k(nu, x):
    """K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt for x > 0."""
    return bessel_k_scaled(nu, x) * math.exp(-x)


def bessel_ratio(nu1, nu2, x):
    """K_nu1(x) / K_nu2(x) without underflow at large x."""
    return bessel_k_scaled(nu1, x) / bessel_k_scaled(nu2, x)


def mean_gamma(m, T):
    """Rest-frame <gamma> of a Maxwell-Juttner gas: K1/K2 + 3T/m."""
    b = m / T
    return bessel_ratio(1, 2, b) + 3.0 / b


# -- Maxwellian parameters and closed forms ------------------------------------

@dataclass(frozen=True)
class MaxwellianParams:
    mu: float = 0.0
    T: float = 1.0
    U: tuple = (1.0, 0.0, 0.0, 0.0)
    m: float = 1.0
    q: float = 1.0
    hbar_scale: float = 1.0

    def __post_init__(self):
        if not self.T > 0.0:
            raise DomainError("T must be > 0")
        if not self.m > 0.0:
            raise DomainError("m must be > 0")
        if not self.hbar_scale > 0.0:
            raise DomainError("hbar_scale must be > 0")
        U = np.asarray(self.U, dtype=float)
        if abs(minkowski_dot(U, U) - 1.0) > 1e-9:
            raise DomainError("U must satisfy U.U = 1")
        object.__setattr__(self, "U", tuple(float(c) for c in U))

    @property
    def prefactor(self):
        return 1.0 / (2.0 * math.pi * self.hbar_scale) ** 3

    def to_dict(self):
        return {"mu": self.mu, "T": self.T, "U": list(self.U), "m": self.m, "q": self.q,
                "hbar_scale": self.hbar_scale}


@dataclass(frozen=True)
class ClosedForm:
    n0: float
    n1: float
    p0: float
    p1: float
    e: float

    def as_tuple(self):
        return (self.n0, self.n1, self.p0, self.p1, self.e)


def maxwellian_closed_form(params, A_ext_U=0.0, A_self_U=0.0):
    """(n0, n1, p0, p1, e) of the first-order expansion in the self-potential."""
    T, m = params.T, params.m
    if not T > 0.0:
        raise DomainError("T must be > 0")
    b = m / T
    # K2(b) exp(arg) assembled in log form so cold gases do not underflow early
    log_n0 = (math.log(params.prefactor * 4.0 * math.pi * m * m * T) + math.log(bessel_k_scaled(2, b)) - b
              + (params.mu - params.q * A_ext_U) / T)
    n0 = math.exp(log_n0)
    n1 = -2.0 * params.q * (A_self_U / T) * n0
    e = m * bessel_ratio(3, 2, b) - T
    return ClosedForm(n0, n1, n0 * T, n1 * T, e)


# -- ensembles -----------------------------------------------------------------

@dataclass
class KineticEnsemble:
    """Particles on the mass shell with invariant weights.

    ``weights`` multiply d^3u/u^0, so the lab number weight of a particle is
    weights * u^0. ``accel`` (du/ds, contravariant) is filled for evolved snapshots.
    """
    r: np.ndarray
    u: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)
    accel: np.ndarray = None

    def __post_init__(self):
        self.r = np.atleast_2d(np.asarray(self.r, dtype=float))
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not (len(self.r) == len(self.u) == len(self.weights)):
            raise ValueError("r, u and weights must have the same length")
        if np.any(self.weights <= 0.0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.weights)

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    @property
    def number_weights(self):
        return self.weights * self.u[:, 0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["weight", "r0", "r1", "r2", "r3", "u0", "u1", "u2", "u3"])
            for wt, r, u in zip(self.weights, self.r, self.u):
                w.writerow([format(x, ".17g") for x in (wt, *r, *u)])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:5], data[:, 5:9], data[:, 0])


class _JuttnerEnvelope:
    """Rejection sampler for x = gamma - 1 with density ~ (1+x) sqrt(x(x+2)) exp(-b x).

    Proposal: exponential with rate lam < b. The log acceptance ratio is concave
    in x, so its maximum is the root of its derivative.
    """

    def __init__(self, b):
        self.b = b
        res = optimize.minimize_scalar(lambda lam: self._log_bound(lam), bounds=(1e-9 * b, b * (1 - 1e-9)),
                                       method="bounded", options={"xatol": 1e-10 * b})
        self.lam = res.x
        self.log_M = self._log_bound(self.lam)

    def _x_star(self, c):
        def d(x):
            return 1.0 / (1.0 + x) + 0.5 / x + 0.5 / (x + 2.0) - c
        lo = 1e-300
        hi = 1.0
        while d(hi) > 0.0:
            hi *= 2.0
        return optimize.brentq(d, lo, hi, xtol=1e-300, rtol=1e-14)

    def log_ratio(self, x, lam):
        return np.log1p(x) + 0.5 * np.log(x * (x + 2.0)) - (self.b - lam) * x - math.log(lam)

    def _log_bound(self, lam):
        return float(self.log_ratio(self._x_star(self.b - lam), lam))


def sample_maxwellian(params, count, rng_seed, box=None):
    """Draw ``count`` Maxwell-Juttner 4-velocities (lab frame) with invariant weights.

    Each particle carries weight (n_MC / count) / (U.u): the rest-frame density
    estimate n_MC is the rejection-sampling estimate of the normalising integral.
    Positions are uniform in ``box`` = (lo, hi) 3-vectors at lab time 0, else at the origin.
    """
    if count <= 0:
        raise ValueError("count must be > 0")
    rng = np.random.default_rng(rng_seed)
    b = params.m / params.T
    env = _JuttnerEnvelope(b)
    xs = []
    n_prop = 0
    n_acc = 0
    batch = max(1024, int(1.5 * count))
    while n_acc < count:
        x = rng.exponential(1.0 / env.lam, size=batch)
        x = np.maximum(x, 1e-300)
        v = rng.random(batch)
        ok = np.log(v) < env.log_ratio(x, env.lam) - env.log_M
        acc = x[ok]
        need = count - n_acc
        if len(acc) >= need:
            # count proposals up to and including the last accepted one used
            idx = np.nonzero(ok)[0][need - 1]
            n_prop += idx + 1
            xs.append(acc[:need])
            n_acc = count
        else:
            n_prop += batch
            xs.append(acc)
            n_acc += len(acc)
    x = np.concatenate(xs)
    gamma = 1.0 + x
    p = np.sqrt(x * (x + 2.0))
    cth = rng.uniform(-1.0, 1.0, size=count)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=count)
    sth = np.sqrt(1.0 - cth * cth)
    u_rest = np.column_stack([gamma, p * sth * np.cos(phi), p * sth * np.sin(phi), p * cth])
    L = boost_matrix(np.asarray(params.U))
    u = u_rest @ L.T

    accept_rate = count / n_prop
    # n = prefactor 4 pi m^3 e^{-b} e^{(mu - qA.U)/T} int (1+x) sqrt(x(x+2)) e^{-bx} dx,
    # and the integral is estimated by M * acceptance rate
    log_n = (math.log(params.prefactor * 4.0 * math.pi * params.m ** 3) - b + params.mu / params.T
             + env.log_M + math.log(accept_rate))
    n_mc = math.exp(log_n)
    if not n_mc > 0.0:
        raise DomainError(f"density exp({log_n:.6g}) underflows; raise mu towards m for cold gases")
    weights = (n_mc / count) / gamma
    if box is None:
        r = np.zeros((count, 4))
    else:
        lo, hi = (np.asarray(c, dtype=float) for c in box)
        r = np.column_stack([np.zeros(count), lo + (hi - lo) * rng.random((count, 3))])
    meta = {"sampler": "juttner-rejection", "seed": rng_seed, "params": params.to_dict(),
            "n_mc": n_mc, "acceptance": accept_rate, "proposals": int(n_prop)}
    return KineticEnsemble(r, u, weights, meta)


# -- moments -------------------------------------------------------------------

def _pairwise_sum(x, axis=0):
    # numpy's add.reduce is pairwise along contiguous axes; fixed shape -> fixed order
    return np.add.reduce(np.ascontiguousarray(x), axis=axis)


@dataclass
class FluidMoments:
    n: float
    N: np.ndarray
    T_tensor: np.ndarray
    count: int = 0
    decomposition: dict = None

    @property
    def density(self):
        """Eckart rest-frame density sqrt(N.N)."""
        return float(math.sqrt(minkowski_dot(self.N, self.N)))

    @property
    def U(self):
        return self.N / self.density

    @property
    def trace(self):
        return float(np.sum(ETA * self.T_tensor))

    def to_dict(self):
        d = {"count": self.count, "n": self.n, "density": self.density, "N": list(map(float, self.N)),
             "U": list(map(float, self.U)), "T_tensor": [list(map(float, row)) for row in self.T_tensor]}
        if self.decomposition is not None:
            d["decomposition"] = dict(self.decomposition)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def compute_moments(ensemble):
    """n = sum w, N = sum w u, T = sum w u u for mass-shell particles."""
    if len(ensemble) == 0:
        raise EmptyEnsemble("cannot take moments of an empty ensemble")
    w = ensemble.weights
    u = ensemble.u
    n = float(_pairwise_sum(w))
    N = _pairwise_sum(w[:, None] * u)
    T = _pairwise_sum(w[:, None, None] * u[:, :, None] * u[:, None, :])
    T = 0.5 * (T + T.T)
    return FluidMoments(n, N, T, len(ensemble))


# -- evolution and moment-equation residuals -------------------------------------

def _hermite_batch(t, dt, p0, m0, p1, m1):
    t = t[:, None]
    dt = dt[:, None]
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    val = h00 * p0 + h10 * dt * m0 + h01 * p1 + h11 * dt * m1
    d00 = 6 * t2 - 6 * t
    d10 = 3 * t2 - 4 * t + 1
    d01 = -6 * t2 + 6 * t
    d11 = 3 * t2 - 2 * t
    der = (d00 * p0 + d01 * p1) / dt + d10 * m0 + d11 * m1
    return val, der


def sample_at_time(s, r, u, a, t):
    """Per-particle state where r^0 = t from batched samples (K, N, 4) on a common s grid."""
    K, N, _ = r.shape
    t0 = r[:, :, 0]
    if np.any(t0[0] > t) or np.any(t0[-1] < t):
        raise ValueError(f"lab time {t} is outside the evolved range of some particles")
    k = np.clip(np.sum(t0 <= t, axis=0) - 1, 0, K - 2)
    idx = np.arange(N)
    dt = s[k + 1] - s[k]
    R0, R1, U0, U1, A0, A1 = r[k, idx], r[k + 1, idx], u[k, idx], u[k + 1, idx], a[k, idx], a[k + 1, idx]
    th = np.clip((t - R0[:, 0]) / (R1[:, 0] - R0[:, 0]), 0.0, 1.0)
    for _ in range(50):
        val, der = _hermite_batch(th, dt, R0[:, :1], U0[:, :1], R1[:, :1], U1[:, :1])
        step = (val[:, 0] - t) / (der[:, 0] * dt)
        th = np.clip(th - step, 0.0, 1.0)
        if np.max(np.abs(step)) < 1e-15:
            break
    rr, _ = _hermite_batch(th, dt, R0, U0, R1, U1)
    rr[:, 0] = t
    uu, aa = _hermite_batch(th, dt, U0, A0, U1, A1)
    uu = uu / np.sqrt(np.einsum("nk,nk->n", uu * _SIGNS, uu))[:, None]
    return rr, uu, aa


def _wrap(r, box):
    if box is None:
        return r
    lo, hi = (np.asarray(c, dtype=float) for c in box)
    r = r.copy()
    r[:, 1:] = lo + np.mod(r[:, 1:] - lo, hi - lo)
    return r


def evolve_snapshots(ensemble, config, params, times, box=None):
    """Evolve every particle and return ensembles at the given lab times.

    Local models ('none', 'll') are stepped in one vectorised batch; history
    models integrate each particle separately. Particles keep their lab number
    weight; the invariant weight is rebuilt as nu / u^0 at each snapshot.
    """
    from dataclasses import replace

    from .integrator import evolve_ensemble, run_scenario
    from .selfforce import SelfForceModel

    times = np.asarray(times, dtype=float)
    nu = ensemble.number_weights
    if np.any(np.abs(ensemble.r[:, 0]) > 0.0):
        raise ValueError("ensemble must start at lab time 0")
    span = float(times.max()) + 2.0 * config.h
    cfg = replace(config, span=span)
    model = SelfForceModel(cfg.model)
    out = []
    if model in (SelfForceModel.NONE, SelfForceModel.LL):
        s, r, u, a = evolve_ensemble(ensemble.r, ensemble.u, cfg, params)
        for t in times:
            rr, uu, aa = sample_at_time(s, r, u, a, t)
            out.append(KineticEnsemble(_wrap(rr, box), uu, nu / uu[:, 0], {"t": float(t)}, aa))
        return out
    states = np.empty((len(times), len(ensemble), 3, 4))
    for i in range(len(ensemble)):
        res = run_scenario(ensemble.r[i], ensemble.u[i], cfg, params)
        for j, t in enumerate(times):
            smp = res.history.at_coordinate_time(t)
            states[j, i] = (smp.r, smp.u, smp.a)
    for j, t in enumerate(times):
        rr, uu, aa = states[j, :, 0], states[j, :, 1], states[j, :, 2]
        out.append(KineticEnsemble(_wrap(rr, box), uu, nu / uu[:, 0], {"t": float(t)}, aa))
    return out


@dataclass
class MomentResiduals:
    """Binned residuals of d_mu N^mu = 0 and d_mu T^{mu nu} - (force density)^nu = 0.

    Arrays have shape (pairs, bins) for continuity and (pairs, 4, bins) for momentum.
    ``*_se`` are Monte-Carlo standard errors from per-particle contributions.
    """
    times: np.ndarray
    continuity: np.ndarray
    continuity_se: np.ndarray
    continuity_scale: np.ndarray
    momentum: np.ndarray
    momentum_se: np.ndarray
    momentum_scale: np.ndarray
    particles_per_bin: np.ndarray

    @staticmethod
    def _z(res, se):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, res / np.where(se > 0, se, 1.0), np.where(res == 0, 0.0, np.inf))
        return z

    @property
    def continuity_z(self):
        return self._z(self.continuity, self.continuity_se)

    @property
    def momentum_z(self):
        return self._z(self.momentum, self.momentum_se)

    @property
    def continuity_normalized(self):
        return self.continuity / np.maximum(self.continuity_scale, np.finfo(float).tiny)

    @property
    def momentum_normalized(self):
        return self.momentum / np.maximum(self.momentum_scale, np.finfo(float).tiny)

    @property
    def max_abs_z(self):
        return float(max(np.max(np.abs(self.continuity_z)), np.max(np.abs(self.momentum_z))))

    def exceedances(self, limit=3.0):
        """Number of bin residuals beyond ``limit`` standard errors."""
        z = np.concatenate([self.continuity_z.ravel(), self.momentum_z.ravel()])
        return int(np.sum(np.abs(z) >= limit))

    def to_dict(self):
        return {
            "times": self.times.tolist(),
            "max_abs_z": self.max_abs_z,
            "beyond_3_se": self.exceedances(3.0),
            "min_particles_per_bin": int(self.particles_per_bin.min()),
            "continuity_z": self.continuity_z.tolist(),
            "momentum_z": self.momentum_z.tolist(),
            "continuity_normalized": self.continuity_normalized.tolist(),
            "momentum_normalized": self.momentum_normalized.tolist(),
        }


def _bin_index(x, box, bins):
    lo, hi = (np.asarray(c, dtype=float) for c in box)
    bins = np.asarray(bins)
    cell = np.floor((np.mod(x - lo, hi - lo)) / ((hi - lo) / bins)).astype(int)
    return np.minimum(cell, bins - 1)


def _flat(cell, bins):
    return np.ravel_multi_index(tuple(cell.T), tuple(bins))


def moment_residuals(snapshots, box, bins=(4, 1, 1)):
    """Finite-difference moment-equation residuals on a periodic Cartesian grid.

    Consecutive snapshot pairs (t_k, t_{k+1}) give a time difference of the
    densities; flux divergences (central differences across neighbouring bins)
    and force sources are averaged over the pair. The source is the recorded
    du/ds of each particle, so any self-force model is covered. Every term is
    a sum over particles, which yields a standard error per bin.
    """
    if len(snapshots) < 2:
        raise InsufficientSnapshots("need at least two snapshots")
    bins = np.asarray(bins, dtype=int)
    lo, hi = (np.asarray(c, dtype=float) for c in box)
    dx = (hi - lo) / bins
    vol = float(np.prod(dx))
    nb = int(np.prod(bins))
    times = np.array([snap.meta["t"] for snap in snapshots])
    nu = snapshots[0].number_weights
    for snap in snapshots:
        if snap.accel is None:
            raise ValueError("snapshots need du/ds for the source term")
        if len(snap) != len(nu):
            raise ValueError("snapshots must hold the same particles")

    def terms(snap):
        cell = _bin_index(snap.r[:, 1:], box, bins)
        own = _flat(cell, bins)
        u0 = snap.u[:, 0]
        # central-difference stencil: contribution of each particle to bin b
        # through its flux, one entry per axis with >= 3 bins
        stencil = []
        for i in range(3):
            if bins[i] < 3:
                continue
            up = cell.copy()
            up[:, i] = (cell[:, i] - 1) % bins[i]     # particle in b+e_i -> bin b = cell - e_i
            dn = cell.copy()
            dn[:, i] = (cell[:, i] + 1) % bins[i]
            stencil.append((i, _flat(up, bins), _flat(dn, bins)))
        return own, u0, stencil

    n_pairs = len(snapshots) - 1
    cont = np.zeros((n_pairs, nb))
    cont_se = np.zeros((n_pairs, nb))
    cont_sc = np.zeros((n_pairs, nb))
    mom = np.zeros((n_pairs, 4, nb))
    mom_se = np.zeros((n_pairs, 4, nb))
    mom_sc = np.zeros((n_pairs, 4, nb))
    count = len(nu)
    per_bin = np.bincount(terms(snapshots[0])[0], minlength=nb)
    w = nu / vol
    for k in range(n_pairs):
        A, B = snapshots[k], snapshots[k + 1]
        dt = times[k + 1] - times[k]
        tA, tB = terms(A), terms(B)
        # per-particle contribution matrices, shape (N, nb), built sparsely by bin
        c_time = np.zeros((count, nb))
        c_flux = np.zeros((count, nb))
        idx = np.arange(count)
        np.add.at(c_time, (idx, tB[0]), w / dt)
        np.add.at(c_time, (idx, tA[0]), -w / dt)
        for snap, (own, u0, stencil) in ((A, tA), (B, tB)):
            for i, up, dn in stencil:
                v = snap.u[:, 1 + i] / u0
                np.add.at(c_flux, (idx, up), 0.5 * w * v / (2.0 * dx[i]))
                np.add.at(c_flux, (idx, dn), -0.5 * w * v / (2.0 * dx[i]))
        c = c_time + c_flux
        cont[k] = c.sum(axis=0)
        cont_se[k] = np.sqrt(count * c.var(axis=0, ddof=1))
        cont_sc[k] = np.maximum(np.abs(c_time.sum(axis=0)), np.abs(c_flux.sum(axis=0)))
        for nu_i in range(4):
            m_time = np.zeros((count, nb))
            m_flux = np.zeros((count, nb))
            m_src = np.zeros((count, nb))
            np.add.at(m_time, (idx, tB[0]), w * B.u[:, nu_i] / dt)
            np.add.at(m_time, (idx, tA[0]), -w * A.u[:, nu_i] / dt)
            for snap, (own, u0, stencil) in ((A, tA), (B, tB)):
                for i, up, dn in stencil:
                    f = snap.u[:, 1 + i] * snap.u[:, nu_i] / u0
                    np.add.at(m_flux, (idx, up), 0.5 * w * f / (2.0 * dx[i]))
                    np.add.at(m_flux, (idx, dn), -0.5 * w * f / (2.0 * dx[i]))
                np.add.at(m_src, (idx, own), 0.5 * w * snap.accel[:, nu_i] / u0)
            c = m_time + m_flux - m_src
            mom[k, nu_i] = c.sum(axis=0)
            mom_se[k, nu_i] = np.sqrt(count * c.var(axis=0, ddof=1))
            mom_sc[k, nu_i] = np.max(np.abs([m_time.sum(axis=0), m_flux.sum(axis=0), m_src.sum(axis=0)]), axis=0)
    return MomentResiduals(times, cont, cont_se, cont_sc, mom, mom_se, mom_sc, per_bin)
