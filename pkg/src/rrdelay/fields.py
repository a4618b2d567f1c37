"""Prescribed analytic external electromagnetic fields.

Each model returns, at a contravariant position ``r``:

* ``potential(r)``  -- covariant A_mu
* ``faraday(r)``    -- covariant F_{mu nu} = d_mu A_nu - d_nu A_mu
* ``faraday_gradient(r)``        -- ``[l, mu, nu]`` = d_l F_{mu nu}
* ``faraday_second_gradient(r)`` -- ``[l, m, mu, nu]`` = d_l d_m F_{mu nu}

The shell-averaged field is taken equal to its centre value; for the smooth
models here the difference is O(sigma^2 d^2 F).
"""
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .geometry import faraday as _faraday, lower_index, wedge

_ZERO4 = np.zeros(4)


class ExternalFieldModel:
    kind = "abstract"

    def potential(self, r):
        raise NotImplementedError

    def faraday(self, r):
        raise NotImplementedError

    def faraday_gradient(self, r):
        return np.zeros((4, 4, 4))

    def faraday_second_gradient(self, r):
        return np.zeros((4, 4, 4, 4))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroField(ExternalFieldModel):
    kind = "zero"

    def potential(self, r):
        return np.zeros(4)

    def faraday(self, r):
        return np.zeros((4, 4))

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class UniformElectric(ExternalFieldModel):
    E: tuple = (0.0, 0.0, 0.0)
    kind = "uniform_electric"

    def __post_init__(self):
        object.__setattr__(self, "E", tuple(float(x) for x in self.E))
        object.__setattr__(self, "_F", _faraday(E=self.E))

    def potential(self, r):
        # phi = -E.x, vector potential zero
        A = np.zeros(4)
        A[0] = -float(np.dot(self.E, np.asarray(r, dtype=float)[1:]))
        return A

    def faraday(self, r):
        return self._F.copy()

    def to_dict(self):
        return {"kind": self.kind, "E": list(self.E)}


@dataclass(frozen=True)
class UniformMagnetic(ExternalFieldModel):
    """Uniform B in the symmetric gauge, vector potential (B x x) / 2."""

    B: tuple = (0.0, 0.0, 0.0)
    kind = "uniform_magnetic"

    def __post_init__(self):
        object.__setattr__(self, "B", tuple(float(x) for x in self.B))
        object.__setattr__(self, "_F", _faraday(B=self.B))

    def potential(self, r):
        x = np.asarray(r, dtype=float)[1:]
        A = np.zeros(4)
        A[1:] = -0.5 * np.cross(self.B, x)
        return A

    def faraday(self, r):
        return self._F.copy()

    def to_dict(self):
        return {"kind": self.kind, "B": list(self.B)}


# septic smoothstep: C^3, exactly 0 below 0 and exactly 1 above 1
_SMOOTHSTEP = [Polynomial([0, 0, 0, 0, 35, -84, 70, -20])]
for _ in range(3):
    _SMOOTHSTEP.append(_SMOOTHSTEP[-1].deriv())


def smoothstep(y, order=0):
    """``order``-th derivative of the septic smoothstep at ``y``."""
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 1.0 if order == 0 else 0.0
    return float(_SMOOTHSTEP[order](y))


def _leibniz(f, g):
    """Derivatives 0..3 of a product from the derivatives of the factors."""
    return np.array([
        f[0] * g[0],
        f[1] * g[0] + f[0] * g[1],
        f[2] * g[0] + 2 * f[1] * g[1] + f[0] * g[2],
        f[3] * g[0] + 3 * f[2] * g[1] + 3 * f[1] * g[2] + f[0] * g[3],
    ])


def _unit(v):
    # leave unit vectors untouched so parse(serialize(x)) == x bit for bit
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("direction must be non-zero")
    return v if abs(norm - 1.0) <= 1e-14 else v / norm


@dataclass(frozen=True)
class PlaneWavePulse(ExternalFieldModel):
    """Linearly polarised plane-wave pulse with compact support.

    The light-front time is tau = t - n.x. For ``start <= tau <= start + width``
    the potential is A_mu = g(tau) eps_mu with

        g = (amplitude / omega) * w(x) * sin(omega (tau - start))   (omega > 0)
        g = amplitude * width * w(x)                                (omega = 0)

    where x = (tau - start) / width and ``w`` is a flat-top window built from two
    septic smoothstep ramps of relative length ``ramp``. Outside the window the
    potential and every derivative vanish identically; F is C^2 at the edges.
    """

    amplitude: float = 1.0
    direction: tuple = (1.0, 0.0, 0.0)
    polarization: tuple = (0.0, 1.0, 0.0)
    omega: float = 0.0
    start: float = 0.0
    width: float = 1.0
    ramp: float = 0.25
    kind = "plane_wave_pulse"

    def __post_init__(self):
        n = np.asarray(self.direction, dtype=float)
        e = np.asarray(self.polarization, dtype=float)
        if not np.linalg.norm(e) > 0.0:
            raise ValueError("polarization must be non-zero")
        n = _unit(n)
        if np.linalg.norm(e - (e @ n) * n) < 1e-6 * np.linalg.norm(e):
            raise ValueError("polarization must not be parallel to direction")
        # repeat until stable so that re-reading the stored vectors is a no-op
        for _ in range(4):
            n_new = _unit(n)
            e_new = e - (e @ n_new) * n_new if abs(e @ n_new) > 1e-14 * np.linalg.norm(e) else e
            e_new = _unit(e_new)
            if np.array_equal(n_new, n) and np.array_equal(e_new, e):
                break
            n, e = n_new, e_new
        if not 0.0 < self.ramp <= 0.5:
            raise ValueError("ramp must lie in (0, 0.5]")
        if self.width <= 0.0:
            raise ValueError("width must be > 0")
        object.__setattr__(self, "direction", tuple(float(x) for x in n))
        object.__setattr__(self, "polarization", tuple(float(x) for x in e))
        k_up = np.concatenate([[1.0], n])
        eps_up = np.concatenate([[0.0], e])
        object.__setattr__(self, "_k_up", k_up)
        object.__setattr__(self, "_k", lower_index(k_up))
        object.__setattr__(self, "_eps", lower_index(eps_up))
        object.__setattr__(self, "_kwedge", wedge(lower_index(k_up), lower_index(eps_up)))

    def light_front_time(self, r):
        return float(self._k @ np.asarray(r, dtype=float))

    def profile(self, tau):
        """(g, g', g'', g''') as functions of the light-front time."""
        x = (tau - self.start) / self.width
        if x <= 0.0 or x >= 1.0:
            return np.zeros(4)
        scale = 1.0 / (self.ramp * self.width)
        up = np.array([smoothstep(x / self.ramp, k) * scale ** k for k in range(4)])
        down = np.array([smoothstep((1.0 - x) / self.ramp, k) * (-scale) ** k for k in range(4)])
        w = _leibniz(up, down)
        if self.omega > 0.0:
            ph = self.omega * (tau - self.start)
            s, c = np.sin(ph), np.cos(ph)
            om = self.omega
            carrier = np.array([s, om * c, -om ** 2 * s, -om ** 3 * c])
            return (self.amplitude / om) * _leibniz(w, carrier)
        return self.amplitude * self.width * w

    def potential(self, r):
        return self.profile(self.light_front_time(r))[0] * self._eps

    def faraday(self, r):
        return self.profile(self.light_front_time(r))[1] * self._kwedge

    def faraday_gradient(self, r):
        g2 = self.profile(self.light_front_time(r))[2]
        return g2 * np.einsum("l,mn->lmn", self._k, self._kwedge)

    def faraday_second_gradient(self, r):
        g3 = self.profile(self.light_front_time(r))[3]
        return g3 * np.einsum("l,m,ab->lmab", self._k, self._k, self._kwedge)

    def to_dict(self):
        return {
            "kind": self.kind,
            "amplitude": float(self.amplitude),
            "direction": list(self.direction),
            "polarization": list(self.polarization),
            "omega": float(self.omega),
            "start": float(self.start),
            "width": float(self.width),
            "ramp": float(self.ramp),
        }


_KINDS = {
    "zero": ZeroField,
    "uniform_electric": UniformElectric,
    "uniform_magnetic": UniformMagnetic,
    "plane_wave_pulse": PlaneWavePulse,
}


def field_from_dict(spec):
    spec = dict(spec)
    kind = spec.pop("kind", "zero")
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown field kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in spec.items()})


def eval_field(model, r):
    """Potential, Faraday tensor and its gradient at ``r``."""
    r = np.asarray(r, dtype=float)
    return model.potential(r), model.faraday(r), model.faraday_gradient(r)


def lorentz_force(F, u, q, m0):
    """Covariant (q/m0) F_{mu nu} u^nu; orthogonal to u by antisymmetry."""
    return (q / m0) * (np.asarray(F) @ np.asarray(u, dtype=float))
