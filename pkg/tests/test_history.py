import numpy as np
import pytest

from rrdelay.errors import FutureQuery
from rrdelay.geometry import minkowski_dot, velocity_from_three
from rrdelay.history import (WorldlineHistory, WorldlineSample, find_retarded_time, read_trajectory_csv,
                             write_trajectory_csv)
from rrdelay.worldlines import Circular, Hyperbolic, inertial


def _helix_history(sigma, h=None, span=6.0):
    c = Circular(radius=1.0, omega=0.6)
    h = sigma / 8.0 if h is None else h
    grid = np.arange(-span, 2.0 + h / 2, h)
    return c, WorldlineHistory.from_function(c, grid)


def test_hermite_reproduces_cubic():
    # a time-like cubic r(s) with r' supplied is reproduced exactly
    def f(s):
        r = np.array([3.0 * s, 0.1 * s ** 3, -0.2 * s ** 2, 0.5 * s])
        u = np.array([3.0, 0.3 * s ** 2, -0.4 * s, 0.5])
        return r, u, np.zeros(4)
    hist = WorldlineHistory.from_function(f, np.linspace(0, 2, 5))
    for s in (0.13, 0.77, 1.91):
        r, dr = hist.position_and_derivative(s)
        assert np.allclose(r, f(s)[0], atol=1e-14)
        assert np.allclose(dr, f(s)[1], atol=1e-13)


def test_hermite_convergence_order():
    c = Circular(radius=1.0, omega=0.6)
    errs = []
    for h in (0.1, 0.05):
        hist = WorldlineHistory.from_function(c, np.arange(0, 4 + h / 2, h))
        s = np.linspace(0.5, 3.5, 37) + 0.0123
        errs.append(max(np.abs(hist.interpolate(x).r - c(x)[0]).max() for x in s))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.15)


def test_prehistory_is_inertial():
    u = velocity_from_three([0.4, 0.0, 0.0])
    hist = WorldlineHistory(0.0, np.zeros(4), u)
    hist.append(WorldlineSample(0.0, np.zeros(4), u, np.zeros(4)))
    smp = hist.interpolate(-2.0)
    assert np.allclose(smp.r, -2.0 * u)
    assert np.allclose(smp.a, 0.0)


def test_append_rejects_non_increasing():
    u = np.array([1.0, 0, 0, 0])
    hist = WorldlineHistory(0.0, np.zeros(4), u)
    hist.append(WorldlineSample(0.0, np.zeros(4), u, np.zeros(4)))
    with pytest.raises(ValueError):
        hist.append(WorldlineSample(0.0, np.zeros(4), u, np.zeros(4)))


def test_future_query_raises():
    _, hist = _helix_history(0.1, span=1.0)
    with pytest.raises(FutureQuery):
        hist.interpolate(hist.frontier + 0.5)


@pytest.mark.parametrize("v", [0.0, 0.3, 0.9])
def test_retarded_time_inertial_is_sigma(v):
    u = velocity_from_three([v, 0.0, 0.0])
    hist = WorldlineHistory.from_function(inertial(u), np.linspace(-2, 1, 31))
    for sigma in (0.01, 0.1, 0.5):
        sp = find_retarded_time(hist, 0.5, sigma)
        assert abs((0.5 - sp) - sigma) / sigma < 1e-10


def test_retarded_time_helix_matches_brute_force():
    sigma = 0.2
    c, hist = _helix_history(sigma)
    s = 1.3
    sp = find_retarded_time(hist, s, sigma)
    # brute force on the analytic helix: dense scan then bisection
    d = np.linspace(1e-6, 3 * sigma, 20001)
    R = c.position(s) - c.position(s - d)
    gfun = minkowski_dot(R, R) - sigma ** 2
    k = np.flatnonzero(np.diff(np.sign(gfun)))[0]
    lo, hi = d[k], d[k + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        R = c.position(s) - c.position(s - mid)
        if minkowski_dot(R, R) < sigma ** 2:
            lo = mid
        else:
            hi = mid
    assert (s - sp) == pytest.approx(lo, rel=1e-8)
    # accelerated motion: the delay is shorter than sigma in proper time? it must be > 0 and near sigma
    assert 0.5 * sigma < s - sp < 2.0 * sigma


def test_retarded_time_hyperbolic_closed_form():
    # for u = (cosh ks, sinh ks, 0, 0): R.R = (4/k^2) sinh^2(k d / 2)
    k, sigma = 0.7, 0.3
    hist = WorldlineHistory.from_function(Hyperbolic(k), np.arange(-3, 2.0001, 0.01))
    sp = find_retarded_time(hist, 1.0, sigma)
    exact = (2.0 / k) * np.arcsinh(k * sigma / 2.0)
    assert (1.0 - sp) == pytest.approx(exact, rel=1e-9)


def test_sigma_must_be_positive():
    _, hist = _helix_history(0.1, span=1.0)
    with pytest.raises(ValueError):
        find_retarded_time(hist, 0.5, 0.0)


def test_trim_and_lookback():
    c = Circular(1.0, 0.5)
    hist = WorldlineHistory(0.0, c(0.0)[0], c(0.0)[1], max_lookback=1.0)
    for s in np.arange(0, 5.0001, 0.1):
        r, u, a = c(s)
        hist.append(WorldlineSample(s, r, u, a))
    assert hist.first_retained >= hist.frontier - 1.0 - 0.1 - 1e-12
    assert len(hist) < 20


def test_csv_round_trip(tmp_path):
    _, hist = _helix_history(0.5, span=1.0)
    p = tmp_path / "t.csv"
    hist.to_csv(p)
    s, r, u, a = read_trajectory_csv(p)
    assert np.array_equal(s, hist.s) and np.array_equal(r, hist.r)
    assert np.array_equal(u, hist.u) and np.array_equal(a, hist.a)
    write_trajectory_csv(tmp_path / "u.csv", s, r, u, a)
    assert (tmp_path / "u.csv").read_bytes() == p.read_bytes()
