"""Closed-form world-lines used as oracles and as synthetic histories.

Each factory returns ``f(s) -> (r, u, a)`` with contravariant components, plus
(where useful) the third derivative via ``jerk(s)``.
"""
import numpy as np


def inertial(u, r0=(0.0, 0.0, 0.0, 0.0)):
    u = np.asarray(u, dtype=float)
    r0 = np.asarray(r0, dtype=float)

    def f(s):
        return r0 + s * u, u.copy(), np.zeros(4)
    return f


class Circular:
    """Uniform circular motion in the x-y plane.

    ``radius`` R and coordinate angular frequency ``omega``; the proper-time
    frequency is Omega = gamma omega with gamma = 1/sqrt(1 - (R omega)^2).
    """

    def __init__(self, radius, omega, phase=0.0):
        v = radius * omega
        if not abs(v) < 1:
            raise ValueError("R * omega must be < 1")
        self.radius = radius
        self.omega = omega
        self.gamma = 1.0 / np.sqrt(1.0 - v * v)
        self.Omega = self.gamma * omega
        self.phase = phase

    def __call__(self, s):
        R, W, g = self.radius, self.Omega, self.gamma
        th = W * s + self.phase
        c, sn = np.cos(th), np.sin(th)
        r = np.array([g * s, R * c, R * sn, 0.0])
        u = np.array([g, -R * W * sn, R * W * c, 0.0])
        a = np.array([0.0, -R * W ** 2 * c, -R * W ** 2 * sn, 0.0])
        return r, u, a

    def jerk(self, s):
        R, W = self.radius, self.Omega
        th = W * s + self.phase
        return np.array([0.0, R * W ** 3 * np.sin(th), -R * W ** 3 * np.cos(th), 0.0])

    def position(self, s):
        """Vectorised r(s) for arrays of s (shape (..., 4))."""
        s = np.asarray(s, dtype=float)
        th = self.Omega * s + self.phase
        return np.stack([self.gamma * s, self.radius * np.cos(th), self.radius * np.sin(th), np.zeros_like(s)], axis=-1)


class Hyperbolic:
    """Uniform proper acceleration ``k`` along x: u = (cosh ks, sinh ks, 0, 0)."""

    def __init__(self, k):
        self.k = k

    def __call__(self, s):
        k = self.k
        ch, sh = np.cosh(k * s), np.sinh(k * s)
        r = np.array([sh / k, (ch - 1.0) / k, 0.0, 0.0])
        u = np.array([ch, sh, 0.0, 0.0])
        a = k * np.array([sh, ch, 0.0, 0.0])
        return r, u, a

    def jerk(self, s):
        k = self.k
        return k * k * np.array([np.cosh(k * s), np.sinh(k * s), 0.0, 0.0])
