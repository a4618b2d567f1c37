import numpy as np
import pytest

from rrdelay import geometry as g
from rrdelay.errors import NonTimelikeVelocity


def test_dot_and_index_gymnastics(rng):
    a, b = rng.normal(size=(2, 4))
    assert g.minkowski_dot(a, b) == pytest.approx(a @ g.ETA @ b, rel=1e-14)
    assert np.array_equal(g.lower_index(g.lower_index(a)), a)
    assert g.minkowski_dot(a, b) == pytest.approx(g.lower_index(a) @ b, rel=1e-14)


def test_stacked_dot(rng):
    a = rng.normal(size=(5, 4))
    assert np.allclose(g.minkowski_dot(a, a), np.einsum("ij,jk,ik->i", a, g.ETA, a))


def test_velocity_constructors_are_on_shell(rng):
    v = 0.6 * rng.uniform(-1, 1, size=3) / np.sqrt(3)
    u = g.velocity_from_three(v)
    assert g.minkowski_dot(u, u) == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(u[1:] / u[0], v)
    w = g.velocity_from_spatial([3.0, -1.0, 2.0])
    assert g.minkowski_dot(w, w) == pytest.approx(1.0, abs=1e-12)


def test_superluminal_rejected():
    with pytest.raises(NonTimelikeVelocity):
        g.velocity_from_three([1.0, 0.0, 0.0])
    with pytest.raises(NonTimelikeVelocity):
        g.renormalize_velocity([0.0, 1.0, 0.0, 0.0])


def test_four_vector_validation():
    with pytest.raises(ValueError):
        g.four_vector([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        g.four_vector([1.0, np.nan, 0.0, 0.0])


def test_boost_maps_rest_to_U_and_preserves_metric():
    U = g.velocity_from_three([0.3, -0.5, 0.2])
    L = g.boost_matrix(U)
    assert np.allclose(L @ np.array([1.0, 0, 0, 0]), U, atol=1e-14)
    assert np.allclose(L.T @ g.ETA @ L, g.ETA, atol=1e-13)


def test_projector_annihilates_U(rng):
    U = g.velocity_from_three([0.1, 0.2, -0.7])
    D = g.projector(U)
    assert np.allclose(D @ g.lower_index(U), 0.0, atol=1e-14)
    # Delta^mu_nu is idempotent
    Dm = D @ g.ETA
    assert np.allclose(Dm @ Dm, Dm, atol=1e-13)


def test_faraday_components():
    F = g.faraday(E=(1.0, 2.0, 3.0), B=(4.0, 5.0, 6.0))
    assert g.is_antisymmetric(F)
    assert F[0, 1] == 1.0 and F[1, 2] == -6.0 and F[3, 1] == -5.0
    assert np.array_equal(g.wedge([1, 0, 0, 0], [0, 1, 0, 0]), -g.wedge([0, 1, 0, 0], [1, 0, 0, 0]))
