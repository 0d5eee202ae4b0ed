import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from confdef.errors import GeometryError
from confdef.lorentz import (
    LightConeModel,
    drop_isometric,
    euclidean_coords,
    lift_conformal,
    metric_signature,
    minkowski_dot,
    psi_embed,
    psi_project,
    psi_push,
)

coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_signature_puts_time_first():
    assert list(metric_signature(4)) == [-1, 1, 1, 1]


def test_minkowski_dot_known_values():
    a = np.array([2.0, 1.0, 0.0])
    b = np.array([1.0, 3.0, -1.0])
    assert minkowski_dot(a, b) == -2.0 + 3.0
    assert minkowski_dot(a, a) == -3.0


def test_dimension_mismatch_raises():
    with pytest.raises(GeometryError):
        minkowski_dot(np.ones(3), np.ones(4))


def test_canonical_model_vectors():
    M = LightConeModel.canonical(3)
    r = 1 / np.sqrt(2)
    assert np.allclose(M.p0, [r, r, 0, 0, 0])
    assert np.allclose(M.w, [-r, r, 0, 0, 0])
    assert minkowski_dot(M.p0, M.w) == pytest.approx(1.0)


def test_model_rejects_bad_vectors():
    M = LightConeModel.canonical(2)
    with pytest.raises(GeometryError):
        LightConeModel(M.p0, M.p0, M.C)


def test_psi_of_origin_is_p0():
    M = LightConeModel.canonical(3)
    assert np.allclose(psi_embed(np.zeros(3), M), M.p0)


def test_psi_of_unit_vector():
    # Psi(e1) = p0 + C e1 - w/2 in closed form
    M = LightConeModel.canonical(2)
    want = M.p0 + M.C[:, 0] - 0.5 * M.w
    assert np.allclose(psi_embed(np.array([1.0, 0.0]), M), want)


def test_model_json_roundtrip():
    M = LightConeModel.canonical(4)
    back = LightConeModel.from_dict(M.to_dict())
    assert np.array_equal(back.C, M.C) and np.array_equal(back.w, M.w)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 4), elements=coords))
def test_light_cone_identities(xy):
    M = LightConeModel.canonical(4)
    x, y = xy
    px, py = psi_embed(x, M), psi_embed(y, M)
    scale = 1 + np.dot(x, x) + np.dot(y, y)
    assert abs(minkowski_dot(px, px)) <= 1e-12 * scale
    assert minkowski_dot(px, M.w) == pytest.approx(1.0, abs=1e-12)
    assert minkowski_dot(px, py) == pytest.approx(-0.5 * np.sum((x - y) ** 2), abs=1e-12 * scale)
    assert np.allclose(euclidean_coords(px, M), x, atol=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(arrays(float, 3, elements=coords), arrays(float, 3, elements=st.floats(-5, 5)))
def test_pushforward_is_isometric(x, v):
    M = LightConeModel.canonical(3)
    dv = psi_push(x, v, M)
    assert minkowski_dot(dv, dv) == pytest.approx(np.dot(v, v), abs=1e-9 * (1 + np.dot(x, x)))
    assert abs(minkowski_dot(dv, psi_embed(x, M))) <= 1e-9 * (1 + np.dot(x, x)) * (1 + np.abs(v).sum())


@settings(max_examples=40, deadline=None)
@given(arrays(float, 3, elements=coords), st.floats(0.1, 10))
def test_lift_then_drop_recovers_map(x, phi):
    M = LightConeModel.canonical(3)
    F = lift_conformal(x, phi, M)
    f, factor = drop_isometric(F, M)
    assert np.allclose(f, x, atol=1e-10 * (1 + np.abs(x).max()))
    assert factor == pytest.approx(phi, rel=1e-12)


def test_projection_rescales_cone_points():
    M = LightConeModel.canonical(2)
    x = np.array([0.3, -1.2])
    assert np.allclose(psi_project(3.5 * psi_embed(x, M), M), psi_embed(x, M))


def test_projection_rejects_forbidden_ray():
    M = LightConeModel.canonical(2)
    with pytest.raises(GeometryError):
        psi_project(2.0 * M.w, M)
