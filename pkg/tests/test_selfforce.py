import numpy as np
import pytest
import sympy as sp

from rrdelay import selfforce as sf
from rrdelay.fields import PlaneWavePulse, UniformMagnetic
from rrdelay.geometry import lower_index, minkowski_dot, velocity_from_three
from rrdelay.history import WorldlineHistory
from rrdelay.selfforce import ParticleParams
from rrdelay.worldlines import Circular, Hyperbolic, inertial


def _hist(worldline, sigma, lo=-3.0, hi=1.0):
    h = sigma / 16.0
    return WorldlineHistory.from_function(worldline, np.arange(lo, hi + h / 2, h))


def test_params_validation():
    with pytest.raises(ValueError):
        ParticleParams(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ParticleParams(1.0, -1.0, 0.1)
    assert ParticleParams(2.0, 1.0, 0.5).m_em == 8.0


@pytest.mark.parametrize("v", [0.0, 0.5])
def test_inertial_potential_is_boosted_coulomb(v):
    u = velocity_from_three([0.0, v, 0.0])
    p = ParticleParams(0.3, 1.0, 0.2)
    A = sf.self_potential_exact(_hist(inertial(u), p.sigma), 0.5, p)
    assert np.allclose(A, (p.q / p.sigma) * lower_index(u), rtol=1e-10, atol=1e-14)


def test_inertial_self_force_vanishes():
    u = velocity_from_three([0.2, 0.3, 0.0])
    p = ParticleParams(1.0, 1.0, 0.1)
    G = sf.self_force_exact(_hist(inertial(u), p.sigma), 0.5, p)
    assert np.max(np.abs(G)) < 1e-10 * p.q ** 2 / p.sigma ** 2


def test_zero_charge_gives_zero():
    p = ParticleParams(0.0, 1.0, 0.1)
    hist = _hist(Circular(1.0, 0.5), 0.1)
    assert not np.any(sf.self_force_exact(hist, 0.5, p))
    assert not np.any(sf.self_potential_exact(hist, 0.5, p))


def test_exact_faraday_antisymmetric_and_force_orthogonal():
    p = ParticleParams(0.5, 1.0, 0.1)
    c = Circular(1.0, 0.6)
    hist = _hist(c, p.sigma)
    for s in (0.0, 0.4):
        F = sf.self_faraday_exact(hist, s, p)
        assert np.allclose(F, -F.T)
        G = sf.self_force_exact(hist, s, p)
        # G covariant, u contravariant: the contraction is a plain dot
        assert abs(G @ c(s)[1]) < 1e-12 * np.linalg.norm(G)


def test_exact_force_leading_order_is_em_mass():
    # small sigma: G -> -(q^2/sigma) a, with corrections O(sigma) relative
    c = Circular(1.0, 0.5)
    q = 1.0
    rel = []
    for sigma in (0.02, 0.01):
        p = ParticleParams(q, 1.0, sigma)
        G = sf.self_force_exact(_hist(c, sigma, lo=-1.0), 0.0, p)
        lead = -p.m_em * lower_index(c(0.0)[2])
        rel.append(np.linalg.norm(G - lead) / np.linalg.norm(lead))
    assert rel[0] < 0.05
    assert rel[0] / rel[1] == pytest.approx(2.0, rel=0.05)


def test_hyperbolic_transverse_bracket_vanishes_symbolically():
    s, k = sp.symbols("s k", positive=True)
    u = sp.Matrix([sp.cosh(k * s), sp.sinh(k * s), 0, 0])
    eta = sp.diag(1, -1, -1, -1)
    a = u.diff(s)
    adot = a.diff(s)
    bracket = adot - u * (u.T * eta * adot)[0]
    assert sp.simplify(bracket) == sp.zeros(4, 1)


def test_hyperbolic_asymptotic_models_reduce_to_mass_term():
    k = 0.5
    hyp = Hyperbolic(k)
    p = ParticleParams(0.2, 1.0, 0.05)
    for s in (0.0, 0.7):
        r, u, a = hyp(s)
        g = sf.present_time_force(u, a, hyp.jerk(s), p)
        assert np.allclose(g, -p.m_em * lower_index(a), atol=1e-14)
        g = sf.retarded_hamiltonian_force(u, a, hyp.jerk(s), p)
        assert np.allclose(g, -p.m_em * lower_index(a), atol=1e-14)


def test_asymptotic_models_on_helix_history():
    c = Circular(1.0, 0.5)
    p = ParticleParams(0.3, 1.0, 0.01)
    hist = _hist(c, p.sigma, lo=-0.5, hi=0.5)
    _, u, a = c(0.0)
    expected = sf.present_time_force(u, a, c.jerk(0.0), p)
    got = sf.self_force_present_time(hist, 0.0, p)
    assert np.allclose(got, expected, rtol=1e-4, atol=1e-8)
    got_r = sf.self_force_retarded_hamiltonian(hist, 0.0, p)
    # both carry -m_EM a at leading order
    lead = -p.m_em * lower_index(a)
    assert np.linalg.norm(got_r - lead) < 0.05 * np.linalg.norm(lead)


def test_ll_h1_orthogonal_for_random_fields(rng):
    for _ in range(20):
        F = rng.normal(size=(4, 4))
        F = F - F.T
        dF = rng.normal(size=(4, 4, 4))
        dF = dF - np.swapaxes(dF, 1, 2)
        U = velocity_from_three(0.5 * rng.uniform(-1, 1, 3))
        h1 = sf.ll_h1(F, dF, U, 0.7, 1.3)
        assert abs(h1 @ U) < 1e-12 * max(1.0, np.abs(h1).max())


def test_ll_force_orthogonal_and_zero_without_field(rng):
    p = ParticleParams(0.1, 1.0, 0.05)
    u = velocity_from_three([0.3, -0.2, 0.1])
    B = UniformMagnetic(B=(0.0, 0.0, 1.0))
    G = sf.self_force_ll_iterative(B, np.zeros(4), u, p)
    assert abs(G @ u) < 1e-15
    pulse = PlaneWavePulse(amplitude=1.0, omega=2.0, start=5.0, width=1.0)
    assert not np.any(sf.self_force_ll_iterative(pulse, np.zeros(4), u, p))


def test_ll_radiated_power_matches_larmor():
    # in a uniform B field h1 reduces to the orthogonal FF term; energy loss
    # rate -G.u-weighted reproduces (2/3) q^2 a^2 at leading order
    p = ParticleParams(0.1, 1.0, 0.05)
    u = velocity_from_three([0.5, 0.0, 0.0])
    B = UniformMagnetic(B=(0.0, 0.0, 1.0))
    G = sf.self_force_ll_iterative(B, np.zeros(4), u, p, include_mass=False)
    a = (p.q / p.m0) * (B.faraday(np.zeros(4)) @ u)
    a2 = -minkowski_dot(a, a)
    # the time component of the radiation force is -(2/3) q^2 a^2 u^0
    assert G[0] == pytest.approx(-(2.0 / 3.0) * p.q ** 2 * a2 * u[0], rel=1e-12)


def test_effective_momentum_doubles_self_potential():
    p = ParticleParams(0.5, 1.0, 0.1)
    u = velocity_from_three([0.2, 0.0, 0.0])
    Aext = np.array([0.1, 0.0, 0.2, 0.0])
    Aself = (p.q / p.sigma) * lower_index(u)
    P = sf.effective_momentum(u, Aext, Aself, p)
    pk = sf.kinetic_momentum(u, Aext, Aself, p)
    assert np.allclose(P - pk, p.q * Aself)
    assert sf.effective_hamiltonian(P, Aext, Aself, p) == pytest.approx(p.m0 / 2.0)
