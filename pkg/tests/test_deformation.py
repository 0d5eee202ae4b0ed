import numpy as np
import pytest

from confdef.config import Tolerances
from confdef.deformation import build_bundle, conformality_residual, integrate_frame, isometry_residual
from confdef.errors import GeometryError
from confdef.grid import GridChart
from confdef.lorentz import minkowski_dot
from confdef.triple import LiftedTriple


def test_member_chain_passes(member_run):
    st = member_run["stages"]
    assert "failure" not in st, st.get("failure")
    for key in ("membership", "triple", "lifted", "genuineness", "structure", "integrate", "project"):
        assert st[key]["ok"], key


def test_immersion_stays_on_light_cone(member_run):
    R = member_run["objs"]["deformation"]
    assert np.abs(minkowski_dot(R.F, R.F)).max() <= 1e-6


def test_frame_stays_orthonormal_in_normal_block(member_run):
    R = member_run["objs"]["deformation"]
    n = R.n
    N = R.normals
    eta = np.diag([-1.0] + [1.0] * (n + 3))
    gram = N @ eta @ np.swapaxes(N, -1, -2)
    # mu, xi1, xi2 spacelike unit and zeta lightlike against mu
    assert np.allclose(np.diagonal(gram, axis1=-2, axis2=-1)[..., 1:3], 1.0, atol=1e-6)


def test_deformation_residuals_under_bar(member_run, mgeom):
    rep = member_run["stages"]["integrate"]
    bar = 10 * mgeom.h**2
    assert rep["path_mismatch_max"] <= bar
    assert rep["isometry_fd_max"] <= bar
    proj = member_run["stages"]["project"]
    assert proj["conformality_fd_max"] <= bar
    assert proj["conformality_frame_max"] <= bar


def test_bundle_connection_is_metric(member_run):
    B = member_run["objs"]["bundle"]
    assert B.compatibility_residual() < 1e-12


def test_bundle_rejects_non_self_adjoint(member_run, mgeom):
    L = member_run["objs"]["lifted"]
    n = L.D1.shape[-1]
    skew = np.zeros((n, n))
    skew[0, 1], skew[1, 0] = -0.3, 0.3
    twisted = LiftedTriple(L.Dbar1, L.Dbar2, L.D1 + skew, L.D2, L.psi, L.J, L.omega1, L.omega2)
    with pytest.raises(GeometryError) as err:
        build_bundle(mgeom.geom, twisted)
    assert err.value.stage == "build_bundle"


def test_strict_integration_rejects_inconsistent_bundle(member_run):
    B = member_run["objs"]["bundle"]
    bad = type(B)(**{**B.__dict__, "psi": B.psi + 0.5 * B.chart.mesh()[0][..., None] * np.eye(B.n)[1]})
    with pytest.raises(GeometryError):
        integrate_frame(bad, tol=Tolerances())


def _inversion(chart, c):
    X = np.stack(chart.mesh(), -1)
    d = X - c
    r2 = (d * d).sum(-1)
    return d / r2[..., None], 1 / r2


def test_inversion_is_conformal():
    chart = GridChart.centered((0, 0, 0), (0.02, 0.02, 0.02), (21, 21, 21))
    G = np.broadcast_to(np.eye(3), chart.shape + (3, 3))
    f, phi = _inversion(chart, np.array([0.0, 0.1, 1.5]))
    assert conformality_residual(f, chart, G, phi) < 10 * 0.02**2


def test_conformality_detects_shear():
    chart = GridChart.centered((0, 0, 0), (0.02, 0.02, 0.02), (21, 21, 21))
    G = np.broadcast_to(np.eye(3), chart.shape + (3, 3))
    X = np.stack(chart.mesh(), -1)
    f = X.copy()
    f[..., 0] += 0.2 * X[..., 1]
    assert conformality_residual(f, chart, G, np.ones(chart.shape)) > 0.1


def test_isometry_residual_of_flat_embedding():
    chart = GridChart.centered((0, 0, 0), (0.05, 0.05, 0.05), (9, 9, 9))
    G = np.broadcast_to(np.eye(3), chart.shape + (3, 3))
    # a spatial slice of Minkowski space, time coordinate first
    X = np.concatenate([np.zeros(chart.shape + (1,)), np.stack(chart.mesh(), -1)], -1)
    assert isometry_residual(X, chart, G) < 1e-12
    assert isometry_residual(1.1 * X, chart, G) > 0.1
