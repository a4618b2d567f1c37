"""World-line storage, dense output and the retarded-time solver."""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import FutureQuery, InsufficientHistory, RootNotBracketed
from .geometry import minkowski_dot, renormalize_velocity

TOL_ROOT = 1e-12
SEARCH_HORIZON = 10.0


@dataclass
class WorldlineSample:
    s: float
    r: np.ndarray
    u: np.ndarray
    a: np.ndarray


def _hermite(t, dt, p0, m0, p1, m1):
    """Cubic Hermite value and s-derivative on one segment."""
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    value = h00 * p0 + h10 * dt * m0 + h01 * p1 + h11 * dt * m1
    d00 = 6 * t2 - 6 * t
    d10 = 3 * t2 - 4 * t + 1
    d01 = -d00
    d11 = 3 * t2 - 2 * t
    deriv = (d00 * p0 + d01 * p1) / dt + d10 * m0 + d11 * m1
    return value, deriv


class WorldlineHistory:
    """Strictly increasing record of (s, r, u, a) with an inertial prehistory.

    For s < s0 the world-line is the straight line through the first sample
    with velocity ``prehistory_velocity`` and zero acceleration.
    ``max_lookback`` (optional) bounds memory: samples further than that
    behind the frontier are dropped as new ones arrive.
    """

    def __init__(self, s0, r0, prehistory_velocity, capacity=64, max_lookback=None):
        self.s0 = float(s0)
        self.r0 = np.array(r0, dtype=float)
        self.prehistory_velocity = np.array(prehistory_velocity, dtype=float)
        self.max_lookback = max_lookback
        cap = max(int(capacity), 4)
        self._s = np.empty(cap)
        self._r = np.empty((cap, 4))
        self._u = np.empty((cap, 4))
        self._a = np.empty((cap, 4))
        self._lo = 0
        self._hi = 0

    # -- storage -----------------------------------------------------------
    def __len__(self):
        return self._hi - self._lo

    @property
    def s(self):
        return self._s[self._lo:self._hi]

    @property
    def r(self):
        return self._r[self._lo:self._hi]

    @property
    def u(self):
        return self._u[self._lo:self._hi]

    @property
    def a(self):
        return self._a[self._lo:self._hi]

    @property
    def frontier(self):
        if self._hi == self._lo:
            return self.s0
        return float(self._s[self._hi - 1])

    @property
    def first_retained(self):
        return float(self._s[self._lo]) if len(self) else self.s0

    def sample(self, i):
        j = self._lo + i if i >= 0 else self._hi + i
        return WorldlineSample(float(self._s[j]), self._r[j].copy(), self._u[j].copy(), self._a[j].copy())

    def last(self):
        return self.sample(-1)

    def append(self, sample):
        s = float(sample.s)
        if len(self) == 0:
            if s != self.s0:
                raise ValueError(f"first sample must sit at s0={self.s0}, got {s}")
        elif not s > self.frontier:
            raise ValueError(f"samples must be strictly increasing in s ({s} <= {self.frontier})")
        if self._hi == len(self._s):
            self._grow()
        i = self._hi
        self._s[i] = s
        self._r[i] = sample.r
        self._u[i] = sample.u
        self._a[i] = sample.a
        self._hi += 1
        if self.max_lookback is not None:
            self.trim(s - self.max_lookback)

    def _grow(self):
        n = len(self)
        cap = max(2 * n, 64)
        for name in ("_s", "_r", "_u", "_a"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:])
            new[:n] = old[self._lo:self._hi]
            setattr(self, name, new)
        self._lo, self._hi = 0, n

    def trim(self, before):
        """Drop samples with s < ``before``, keeping two so the oldest retained segment stays interpolable."""
        keep_from = int(np.searchsorted(self.s, before, side="right")) - 1
        keep_from = min(max(keep_from, 0), max(len(self) - 2, 0))
        self._lo += keep_from

    @property
    def step(self):
        """Median sample spacing (nan with fewer than two samples)."""
        if len(self) < 2:
            return float("nan")
        return float(np.median(np.diff(self.s)))

    @classmethod
    def from_samples(cls, s, r, u, a, prehistory_velocity=None, **kw):
        s = np.asarray(s, dtype=float)
        hist = cls(s[0], r[0], u[0] if prehistory_velocity is None else prehistory_velocity,
                   capacity=len(s), **kw)
        for i in range(len(s)):
            hist.append(WorldlineSample(s[i], np.asarray(r[i], float), np.asarray(u[i], float), np.asarray(a[i], float)))
        return hist

    @classmethod
    def from_function(cls, worldline, s_grid, prehistory_velocity=None, **kw):
        """Sample an analytic ``worldline(s) -> (r, u, a)`` on ``s_grid``."""
        rows = [worldline(float(si)) for si in s_grid]
        r, u, a = (np.array(x) for x in zip(*rows))
        return cls.from_samples(s_grid, r, u, a, prehistory_velocity, **kw)

    # -- queries -----------------------------------------------------------
    def _segment(self, s_query):
        if s_query > self.frontier:
            raise FutureQuery(f"query s={s_query!r} beyond frontier {self.frontier!r}")
        if s_query < self.first_retained and len(self) and self._lo > 0:
            raise InsufficientHistory(f"s={s_query!r} precedes the retained history ({self.first_retained!r})")
        i = int(np.searchsorted(self.s, s_query, side="right")) - 1
        return min(i, len(self) - 2)

    def position_and_derivative(self, s_query):
        """r and dr/ds of the Hermite interpolant (the root solver's inner call)."""
        if s_query < self.s0:
            return self.r0 + (s_query - self.s0) * self.prehistory_velocity, self.prehistory_velocity
        if len(self) == 0 and s_query == self.s0:
            return self.r0, self.prehistory_velocity
        if len(self) == 1:
            if s_query == self.s0:
                return self._r[self._lo], self._u[self._lo]
            raise FutureQuery(f"query s={s_query!r} beyond frontier {self.frontier!r}")
        i = self._segment(s_query) + self._lo
        s0, s1 = self._s[i], self._s[i + 1]
        dt = s1 - s0
        return _hermite((s_query - s0) / dt, dt, self._r[i], self._u[i], self._r[i + 1], self._u[i + 1])

    def interpolate(self, s_query):
        """Sample at ``s_query``: exact prehistory, exact nodes, cubic Hermite between."""
        s_query = float(s_query)
        if s_query < self.s0:
            r = self.r0 + (s_query - self.s0) * self.prehistory_velocity
            return WorldlineSample(s_query, r, self.prehistory_velocity.copy(), np.zeros(4))
        if s_query > self.frontier:
            raise FutureQuery(f"query s={s_query!r} beyond frontier {self.frontier!r}")
        if len(self) == 0:
            return WorldlineSample(self.s0, self.r0.copy(), self.prehistory_velocity.copy(), np.zeros(4))
        if len(self) == 1:
            return self.sample(0)
        i = self._segment(s_query)
        j = i + self._lo
        if s_query == self._s[j]:
            return self.sample(i)
        if s_query == self._s[j + 1]:
            return self.sample(i + 1)
        s0, s1 = self._s[j], self._s[j + 1]
        dt = s1 - s0
        t = (s_query - s0) / dt
        r, _ = _hermite(t, dt, self._r[j], self._u[j], self._r[j + 1], self._u[j + 1])
        u, a = _hermite(t, dt, self._u[j], self._a[j], self._u[j + 1], self._a[j + 1])
        return WorldlineSample(s_query, r, renormalize_velocity(u), a)

    def at_coordinate_time(self, t, tol=1e-13):
        """Sample where r^0 = t (r^0 increases monotonically along a time-like world-line)."""
        lo, hi = self.s0, self.frontier
        r_lo = self.position_and_derivative(lo)[0][0]
        if t < r_lo:
            # inside the prehistory r^0 is linear in s
            return self.interpolate(self.s0 + (t - r_lo) / self.prehistory_velocity[0])
        if t > self.position_and_derivative(hi)[0][0]:
            raise FutureQuery(f"coordinate time {t} beyond frontier")
        x = lo + (t - r_lo) / max(self.prehistory_velocity[0], 1.0)
        x = min(max(x, lo), hi)
        for _ in range(100):
            r, dr = self.position_and_derivative(x)
            g = r[0] - t
            if abs(g) <= tol * max(1.0, abs(t)):
                break
            if g > 0:
                hi = x
            else:
                lo = x
            x_new = x - g / dr[0]
            x = x_new if lo < x_new < hi else 0.5 * (lo + hi)
        return self.interpolate(x)

    def to_csv(self, path):
        write_trajectory_csv(path, self.s, self.r, self.u, self.a)


def write_trajectory_csv(path, s, r, u, a):
    header = ["s"] + [f"{n}{i}" for n in "rua" for i in range(4)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(s)):
            row = [s[k], *r[k], *u[k], *a[k]]
            w.writerow([format(float(x), ".17g") for x in row])


def read_trajectory_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:5], data[:, 5:9], data[:, 9:13]


def find_retarded_time(history, s, sigma, r_now=None, tol=TOL_ROOT, guess=None):
    """Causal root s' < s of (r(s) - r(s')).(r(s) - r(s')) = sigma^2.

    ``r_now`` supplies r(s) when s lies beyond the stored frontier (integrator
    sub-stages). The delay d = s - s' is bracketed starting from d = sigma and
    refined by Newton steps on the Hermite interpolant, falling back to
    bisection whenever a step leaves the bracket or stalls.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    s = float(s)
    if r_now is None:
        r_now = history.interpolate(s).r
    sig2 = sigma * sigma

    def g(d):
        r, dr = history.position_and_derivative(s - d)
        R = r_now - r
        return minkowski_dot(R, R) - sig2, 2.0 * minkowski_dot(R, dr)

    d_min = max(s - history.frontier, 0.0)
    g_min = g(d_min)[0] if d_min > 0 else -sig2
    if g_min >= 0.0:
        raise FutureQuery(f"retarded point for s={s} lies beyond the stored frontier; step too large for sigma")

    x = sigma if guess is None else float(guess)
    x = max(x, d_min)
    gx, dgx = g(x)
    if gx == 0.0:
        return s - x
    if gx < 0.0:
        lo, hi = x, None
        for factor in (1.125, 1.5, 2.0, 3.0, 5.0, SEARCH_HORIZON):
            cand = sigma * factor
            if cand <= lo:
                continue
            gc, dgc = g(cand)
            if gc >= 0.0:
                hi = cand
                break
            lo, x, gx, dgx = cand, cand, gc, dgc
        if hi is None:
            raise RootNotBracketed(f"no sign change of the delay equation within {SEARCH_HORIZON} sigma at s={s}")
    else:
        lo, hi = d_min, x

    dx_old = hi - lo
    for _ in range(100):
        if abs(gx) <= tol * sig2:
            return s - x
        if gx < 0.0:
            lo = x
        else:
            hi = x
        step = gx / dgx if dgx > 0.0 else np.inf
        x_new = x - step
        if not (lo < x_new < hi) or abs(step) > 0.5 * dx_old:
            x_new = 0.5 * (lo + hi)
            dx_old = hi - lo
        else:
            dx_old = abs(step)
        if x_new == x or hi - lo <= 4 * np.finfo(float).eps * hi:
            return s - x_new
        x = x_new
        gx, dgx = g(x)
    raise RootNotBracketed(f"retarded-time iteration did not converge at s={s}")
