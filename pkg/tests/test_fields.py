import numpy as np
import pytest

from rrdelay import fields
from rrdelay.geometry import is_antisymmetric, lower_index, velocity_from_three

MODELS = [
    fields.ZeroField(),
    fields.UniformElectric(E=(0.3, -0.2, 0.5)),
    fields.UniformMagnetic(B=(0.1, 0.4, -1.0)),
    fields.PlaneWavePulse(amplitude=1.3, direction=(1.0, 1.0, 0.0), polarization=(0.0, 0.0, 1.0),
                          omega=2.0, start=-1.0, width=4.0),
    fields.PlaneWavePulse(amplitude=0.7, direction=(0.0, 0.0, 1.0), polarization=(1.0, 0.0, 0.0),
                          omega=0.0, start=-1.0, width=3.0, ramp=0.5),
]
POINTS = [np.array([0.3, 0.1, -0.2, 0.4]), np.array([1.1, -0.3, 0.2, 0.0])]


def _grad(fn, r, eps=1e-5):
    cols = []
    for l in range(4):
        e = np.zeros(4)
        e[l] = eps
        cols.append((fn(r + e) - fn(r - e)) / (2 * eps))
    return np.array(cols)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
@pytest.mark.parametrize("r", POINTS)
def test_faraday_is_curl_of_potential(model, r):
    dA = _grad(model.potential, r)           # [l, nu] = d_l A_nu
    F = model.faraday(r)
    assert is_antisymmetric(F)
    assert np.allclose(F, dA - dA.T, atol=1e-8)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
@pytest.mark.parametrize("r", POINTS)
def test_gradients_match_finite_differences(model, r):
    assert np.allclose(model.faraday_gradient(r), _grad(model.faraday, r), atol=1e-7)
    assert np.allclose(model.faraday_second_gradient(r), _grad(model.faraday_gradient, r), atol=1e-6)


def test_uniform_magnetic_gyration_force():
    B = fields.UniformMagnetic(B=(0.0, 0.0, 1.0))
    u = velocity_from_three([0.5, 0.0, 0.0])
    f = fields.lorentz_force(B.faraday(np.zeros(4)), u, q=1.0, m0=1.0)
    # q v x B = -y direction for v along x, B along z; covariant y picks a sign flip
    assert np.isclose(lower_index(f)[2], -u[1])


def test_pulse_vanishes_outside_support():
    p = fields.PlaneWavePulse(amplitude=1.0, direction=(1.0, 0.0, 0.0), omega=1.0, start=0.0, width=2.0)
    for r in ([-0.5, 0.0, 0.0, 0.0], [2.5, 0.0, 0.0, 0.0], [3.0, 0.5, 0.0, 0.0]):
        assert not np.any(p.faraday(np.array(r)))
        assert not np.any(p.potential(np.array(r)))
    assert np.any(p.faraday(np.array([1.0, 0.0, 0.0, 0.0])))


def test_smoothstep_edges():
    for k in range(4):
        assert fields.smoothstep(0.0, k) == 0.0
    assert fields.smoothstep(1.0, 0) == 1.0
    for k in (1, 2, 3):
        assert abs(fields.smoothstep(1.0, k)) < 1e-12


def test_field_round_trip():
    for m in MODELS:
        assert fields.field_from_dict(m.to_dict()) == m
