import numpy as np
import pytest

from confdef.congruence import example_surface, gallery_spec, isothermal_reparam
from confdef.errors import GeometryError
from confdef.grid import GridChart
from confdef.surface import (
    classify_conjugate,
    flat_chart_surface,
    interior,
    q_operator,
    rotated_torus_surface,
    surface_from_function,
)


@pytest.fixture
def chart():
    return GridChart.from_ranges([(-0.5, 0.5), (-0.5, 0.5)], (41, 41))


def test_flat_torus_metric_and_christoffels(chart):
    S = flat_chart_surface(chart)
    assert S.unit_residual() < 1e-14
    assert np.allclose(interior(S.metric), np.eye(2), atol=1e-3)
    assert np.abs(interior(S.christoffel)).max() < 1e-3


def test_flat_torus_is_hyperbolic(chart):
    C = classify_conjugate(flat_chart_surface(chart))
    assert C.kind == "hyperbolic"
    assert C.square_residual() == 0.0


def test_rotated_torus_is_elliptic(chart):
    C = classify_conjugate(rotated_torus_surface(chart))
    assert C.kind == "elliptic"
    assert C.residuals["hyperbolic"] > 10 * C.residuals["threshold"]


def test_degenerate_metric_raises(chart):
    S = surface_from_function(lambda u, v: np.stack([0 * u, np.cos(u), np.sin(u), 0 * u], -1), chart)
    with pytest.raises(GeometryError):
        S.metric


def test_q_operator_on_constant_flat(chart):
    # flat metric: Q(c) = F c = 0 and Q(uv) = 1
    S = flat_chart_surface(chart)
    U, V = chart.mesh()
    assert np.abs(interior(q_operator(U * V, S)) - 1).max() < 1e-3


def test_q_operator_elliptic_branch(chart):
    S = rotated_torus_surface(chart)
    U, V = chart.mesh()
    # constant theta picks up the (E + G)/4 term only
    q = interior(q_operator(np.ones(chart.shape), S, "elliptic"))
    assert np.allclose(q, 0.5, atol=1e-3)


def test_unknown_kind_raises(chart):
    with pytest.raises(GeometryError):
        q_operator(np.ones(chart.shape), flat_chart_surface(chart), "parabolic")


@pytest.mark.parametrize("variant", ["literal", "generic"])
def test_gallery_christoffels_closed_form(variant):
    # isothermal form of du^2 + cos^2 u dv^2: Gamma^1 = 0, Gamma^2 = -tanh ut
    h = 0.02
    N = 51
    spec = gallery_spec(3, variant)
    S0 = example_surface(spec, GridChart.from_ranges([(-0.75, 0.75), (-0.5, 0.5)], (N, N)))
    S = isothermal_reparam(S0, chart=GridChart.from_ranges([(-0.5, 0.5), (-0.5, 0.5)], (N, N)))
    ut = S.chart.axis(0)
    assert np.abs(interior(S.gamma1)).max() < 1e-10
    assert np.abs(interior(S.gamma2 + np.tanh(ut)[:, None])).max() < 10 * h * h
    sech2 = 1 / np.cosh(ut) ** 2
    assert np.allclose(np.exp(2 * S.lam), sech2, atol=1e-12)
    assert np.abs(interior(S.E - sech2[:, None])).max() < 10 * h * h
