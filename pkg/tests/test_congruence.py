import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confdef.congruence import (
    CircleSumCurve,
    ExampleSurfaceSpec,
    IsothermalMap,
    RuledBetaCurve,
    build_congruence,
    congruence_report,
    envelope_reconstruct,
    envelope_report,
    example_surface,
    gallery_spec,
    leaf_chart,
    quotient_surface,
    sphere_points,
)
from confdef.errors import GeometryError
from confdef.grid import GridChart
from confdef.lorentz import minkowski_dot


def test_isothermal_coordinate_closed_form():
    # ut(u) = asinh(tan u) for rho = cos u; value frozen from a 30-digit evaluation
    m = IsothermalMap(np.cos, -1.0, 1.0)
    assert m.forward(0.5) == pytest.approx(0.522238103278440330, abs=1e-12)
    assert m.inverse(0.522238103278440330) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.2, 1.2))
def test_isothermal_inverse_roundtrip(u):
    m = IsothermalMap(np.cos, -1.3, 1.3)
    assert m.inverse(m.forward(u)) == pytest.approx(u, abs=1e-11)


def test_isothermal_domain_check():
    with pytest.raises(GeometryError):
        IsothermalMap(np.cos, -2.0, 2.0)


@pytest.mark.parametrize("rate", [0.0, 0.5, 1.0])
def test_ruled_beta_is_unit_speed_and_unit(rate):
    b = RuledBetaCurve(rate)
    u = np.linspace(-1, 1, 31)
    assert np.allclose(minkowski_dot(b(u), b(u)), 1.0, atol=1e-13)
    assert np.allclose(minkowski_dot(b.derivative(u), b.derivative(u)), 1.0, atol=1e-12)
    # derivative against a centred difference
    eps = 1e-6
    assert np.allclose((b(u + eps) - b(u - eps)) / (2 * eps), b.derivative(u), atol=1e-8)


def test_circle_curve_validation():
    with pytest.raises(GeometryError):
        CircleSumCurve((0.5,), (1.0,))
    c = CircleSumCurve.balanced(6)
    v = np.linspace(0, 3, 7)
    assert np.allclose(np.sum(c(v) ** 2, -1), 1.0)
    assert np.allclose(np.sum(c.derivative(v) ** 2, -1), 1.0)


def test_spec_roundtrip_and_de_sitter():
    spec = gallery_spec(6)
    back = ExampleSurfaceSpec.from_dict(spec.to_dict())
    u, v = np.meshgrid(np.linspace(-0.5, 0.5, 5), np.linspace(-1, 1, 5), indexing="ij")
    assert np.array_equal(back(u, v), spec(u, v))
    assert spec(u, v).shape[-1] == 9
    assert np.allclose(minkowski_dot(spec(u, v), spec(u, v)), 1.0, atol=1e-13)


def test_gallery_needs_n3():
    with pytest.raises(GeometryError):
        gallery_spec(2)


def test_sphere_points_on_unit_sphere():
    ch = leaf_chart(5, (5, 5, 5), 0.2)
    x = sphere_points(np.stack(ch.mesh(), -1))
    assert np.allclose(np.sum(x * x, -1), 1.0)


@pytest.fixture(scope="module")
def small_envelope():
    spec = gallery_spec(4)
    h = 0.05
    S = example_surface(spec, GridChart.centered((0, 0), (h, h), (17, 17)))
    return S, envelope_reconstruct(S, (5, 5), h)


def test_envelope_touches_every_sphere(small_envelope):
    S, H = small_envelope
    rep = envelope_report(S, H)
    assert rep["incidence_max"] < 1e-12
    assert rep["ok"]


def test_exact_congruence_is_leaf_constant(small_envelope):
    _, H = small_envelope
    SC = build_congruence(H, use_exact=True)
    Q = quotient_surface(SC)
    assert Q.leaf_dependence < 1e-12


def test_fd_congruence_matches_shape_operator(small_envelope):
    from confdef.hypersurface import shape_operator

    S, H = small_envelope
    g = shape_operator(H)
    rep = congruence_report(build_congruence(H, geom=g), g)
    assert rep["ok"], rep
    assert rep["unit_max"] < 1e-8
