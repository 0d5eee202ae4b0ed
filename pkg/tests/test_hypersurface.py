import numpy as np
import pytest

from confdef.errors import GeometryError
from confdef.grid import GridChart, crop
from confdef.hypersurface import (
    HypersurfaceChart,
    check_not_surface_like,
    cylinder_over_surface,
    invert,
    shape_operator,
    splitting_report,
)


@pytest.fixture(scope="module")
def chart3():
    return GridChart.centered((0, 0, 0), (0.05, 0.05, 0.05), (17, 17, 7))


def round_sphere(chart):
    U, V, T = chart.mesh()
    pos = np.stack([np.cos(U) * np.cos(V) * np.cos(T), np.cos(U) * np.cos(V) * np.sin(T), np.cos(U) * np.sin(V), np.sin(U)], -1)
    return HypersurfaceChart(chart, pos)


def test_chart_shape_validation(chart3):
    with pytest.raises(GeometryError):
        HypersurfaceChart(chart3, np.zeros(chart3.shape + (3,)))


def test_umbilic_sphere_has_no_isolated_curvature(chart3):
    with pytest.raises(GeometryError, match="multiplicity"):
        shape_operator(round_sphere(chart3))


def test_sphere_curvature_is_one(chart3):
    g = shape_operator(round_sphere(chart3), require_multiplicity=False)
    assert np.allclose(g.eigs, 1.0, atol=1e-3)


def test_cylinder_is_surface_like(chart3):
    g = shape_operator(cylinder_over_surface(chart3))
    assert np.allclose(g.lam, 0.0, atol=1e-12)
    rep = splitting_report(g)
    assert rep["surface_like"]
    with pytest.raises(GeometryError) as err:
        check_not_surface_like(g)
    assert err.value.stage == "splitting_tensor"


def test_surface_likeness_survives_inversion(chart3):
    # a Mobius image of a cylinder is still conformally surface-like
    H = invert(cylinder_over_surface(chart3), [0.3, -0.2, 2.0, 0.1])
    with pytest.raises(GeometryError):
        check_not_surface_like(shape_operator(H))


def test_envelope_curvature_matches_closed_form(mgeom):
    g = mgeom.geom
    exact = crop(mgeom.H.exact["lam"], mgeom.H.leaf_axes, 1)
    rel = np.abs(g.lam - exact) / np.abs(exact)
    assert rel.max() < 10 * mgeom.h**2
    assert g.multiplicity_ok()


def test_envelope_is_not_surface_like(mgeom):
    rep = mgeom.reports["splitting"]
    assert not rep["surface_like"]
    assert rep["span_I_residual_median"] > 100 * 10 * mgeom.h**2 * 0.01


def test_horizontal_lifts_are_orthogonal_to_leaves(mgeom):
    g = mgeom.geom
    GX = g.G @ g.X
    assert np.abs(GX[..., 2:, :]).max() < 1e-10


def test_distinguished_curvature_is_constant_on_leaves(mgeom):
    rep = mgeom.reports["dupin"]
    assert rep["leaf_dlam_max"] < 10 * mgeom.h**2
