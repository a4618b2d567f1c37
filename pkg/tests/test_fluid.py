import json

import numpy as np
import pytest

from rrdelay import fluid as fl
from rrdelay.errors import DomainError
from rrdelay.fields import PlaneWavePulse, UniformMagnetic, ZeroField
from rrdelay.geometry import lower_index, minkowski_dot, velocity_from_three
from rrdelay.selfforce import ParticleParams, self_force_ll_iterative

PULSE = PlaneWavePulse(amplitude=0.8, direction=(0.0, 1.0, 0.0), polarization=(1.0, 0.0, 0.0),
                       omega=1.5, start=-2.0, width=6.0)
PARAMS = ParticleParams(0.2, 1.0, 0.05)
R = np.array([0.4, 0.2, -0.1, 0.3])


def _isothermal():
    H = np.zeros((4, 4))
    H[1, 1] = 0.05
    H[0, 2] = H[2, 0] = 0.02
    return fl.IsothermalMaxwellian(U=velocity_from_three([0.2, 0.1, 0.0]), T=0.4, n0=2.0,
                                   grad=(0.03, 0.1, -0.05, 0.02), hess=H)


@pytest.mark.parametrize("cb", [fl.ShearFlow(k=0.7), fl.RigidRotation(omega=0.4), _isothermal()],
                         ids=["shear", "rotation", "isothermal"])
def test_closed_form_gradients_match_fd_fallback(cb):
    base = fl.FluidCallbacks
    assert np.allclose(cb.dU(R), base.dU(cb, R), atol=1e-9)
    assert np.allclose(cb.d2U(R), base.d2U(cb, R), atol=1e-6)
    assert np.allclose(cb.dn(R), base.dn(cb, R), atol=1e-9)
    assert np.allclose(cb.dP(R), base.dP(cb, R), atol=1e-9)
    assert np.allclose(cb.d2P(R), base.d2P(cb, R), atol=1e-6)


@pytest.mark.parametrize("cb", [fl.ShearFlow(k=0.7), fl.RigidRotation(omega=0.4)], ids=["shear", "rotation"])
def test_flow_velocity_on_shell_and_acceleration_transverse(cb):
    U, DU, D2U = fl.convective_derivatives(cb, R)
    assert minkowski_dot(U, U) == pytest.approx(1.0, abs=1e-13)
    assert abs(minkowski_dot(U, DU)) < 1e-13
    assert minkowski_dot(U, D2U) == pytest.approx(-minkowski_dot(DU, DU), abs=1e-12)


def test_uniform_rest_fluid_potential_is_coulomb():
    A = fl.fluid_self_potential_present(np.array([1.0, 0, 0, 0]), np.zeros(4), 0.1, 0.3)
    assert np.allclose(A, [3.0, 0, 0, 0])


def test_present_force_is_transverse():
    cb = fl.RigidRotation(omega=0.4)
    U, DU, D2U = fl.convective_derivatives(cb, R)
    K = fl.fluid_self_force_present(U, DU, D2U, 0.05, 0.3, 1.0)
    assert abs(K @ U) < 1e-12 * np.linalg.norm(K)


def test_retarded_and_present_agree_at_small_sigma():
    cb = fl.RigidRotation(omega=0.4)
    U, DU, D2U = fl.convective_derivatives(cb, R)
    gaps = []
    for sig in (0.02, 0.01):
        present = fl.fluid_self_force_present(U, DU, D2U, sig, 0.3, 1.0)
        _, ret = fl.fluid_self_force_retarded(cb, R, sig, 0.3, 1.0)
        gaps.append(np.linalg.norm(present - ret) / np.linalg.norm(present))
    assert gaps[0] < 0.05
    assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.05)


def test_iterated_acceleration_matches_fd_oracle():
    cb = _isothermal()
    D2U, terms = fl.ll_iterated_acceleration(cb, PULSE, R, PARAMS)
    oracle = fl.flux_derivative_oracle(cb, PULSE, R, PARAMS)
    assert np.allclose(D2U, oracle, atol=1e-9)
    assert set(terms) == {"field_gradient", "field_field", "field_pressure", "pressure_log_density",
                          "pressure_second_gradient"}


def test_h2_hand_expansion_isothermal_rest():
    # U at rest, no field, n = n0 + g0 t + gx x: only the (divP)(D ln n) term survives
    n0, g0, gx, T = 2.0, 0.3, 0.5, 0.7
    cb = fl.IsothermalMaxwellian(T=T, n0=n0, grad=(g0, gx, 0.0, 0.0))
    h2, t = fl.ll_h2(cb, ZeroField(), np.zeros(4), PARAMS)
    assert np.allclose(h2, [0.0, -T * gx * g0 / n0 ** 2, 0.0, 0.0], atol=1e-15)
    assert not np.any(t["t1"]) and not np.any(t["t3"])


def test_h2_is_transverse_pressure_part_of_iterated_acceleration():
    cb = _isothermal()
    h2, _ = fl.ll_h2(cb, PULSE, R, PARAMS)
    _, terms = fl.ll_iterated_acceleration(cb, PULSE, R, PARAMS)
    pressure_part = terms["field_pressure"] + terms["pressure_log_density"] + terms["pressure_second_gradient"]
    U = cb.U(R)
    # Delta^mu_nu applied to the pressure part, index lowered
    transverse = pressure_part - U * minkowski_dot(U, pressure_part)
    assert np.allclose(h2, lower_index(transverse), atol=1e-13)


def test_zero_pressure_matches_particle_ll(rng):
    B = UniformMagnetic(B=(0.1, 0.3, 1.0))
    for _ in range(10):
        U = velocity_from_three(0.6 * rng.uniform(-1, 1, 3) / np.sqrt(3))
        cb = fl.UniformFluid(U=U, n=1.5)
        r = rng.normal(size=4)
        for fld in (B, PULSE):
            K = fl.fluid_ll_force(cb, fld, r, PARAMS)
            G = self_force_ll_iterative(fld, r, U, PARAMS) / PARAMS.m0
            assert np.array_equal(K, G)


def test_fluid_ll_force_orthogonal_with_pressure():
    cb = _isothermal()
    K, info = fl.fluid_ll_force(cb, PULSE, R, PARAMS, breakdown=True)
    U = cb.U(R)
    # -(1/sigma)(F U - (1/n) div P) is not transverse; the remaining pieces are
    rest = K - (PARAMS.q ** 2 / PARAMS.m0) * (-(1 / PARAMS.sigma)) * (
        (PARAMS.q / PARAMS.m0) * (PULSE.faraday(R) @ U) - info["pressure_force"])
    assert abs(rest @ U) < 1e-12 * np.linalg.norm(rest)
    doc = json.loads(fl.breakdown_json(cb, PULSE, R, PARAMS))
    assert set(doc["fluid_ll"]["h2_terms"]) == {f"t{i}" for i in range(1, 7)}


def test_vanishing_density_rejected():
    cb = fl.IsothermalMaxwellian(n0=0.0)
    with pytest.raises(DomainError):
        fl.fluid_ll_force(cb, ZeroField(), np.zeros(4), PARAMS)
