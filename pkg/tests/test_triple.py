import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from confdef.config import RunConfig
from confdef.cs_solver import CsCandidate, evaluate_candidate
from confdef.deformation import check_genuine, genuineness_diagnostics
from confdef.errors import GeometryError
from confdef.triple import (
    LiftedTriple,
    _continuous_sqrt,
    bar_triple_from_arrays,
    elliptic_roots,
    flatness_check,
    genuineness_margins,
    hyperbolic_roots,
    perturb_psi,
    reconstruct_bar_triple,
    triple_distance,
    verify_bar_conditions,
    verify_conditions_i_ix,
)
from confdef.workflow import cs_surface

SQ2 = np.sqrt(2.0)


def diag_pair(t1, t2, shape=(6, 6)):
    D1 = np.zeros(shape + (2, 2))
    D2 = np.zeros(shape + (2, 2))
    D1[..., 0, 0], D1[..., 1, 1] = t1 / SQ2, 1 / (t1 * SQ2)
    D2[..., 0, 0], D2[..., 1, 1] = t2 / SQ2, 1 / (t2 * SQ2)
    return D1, D2


@settings(max_examples=50, deadline=None)
@given(st.floats(2.05, 20), st.floats(2.05, 20))
def test_hyperbolic_roots_vieta(alpha, beta):
    a, b = np.array([alpha]), np.array([beta])
    t1, t2 = hyperbolic_roots(a, b)
    assert t1[0] < t2[0]
    assert t1[0] + t2[0] == pytest.approx(alpha, abs=1e-12 * alpha)
    assert t1[0] * t2[0] == pytest.approx(alpha / beta, abs=1e-12 * alpha)


def test_hyperbolic_roots_degenerate():
    with pytest.raises(GeometryError):
        hyperbolic_roots(np.array([2.0]), np.array([2.0]))
    with pytest.raises(GeometryError):
        hyperbolic_roots(np.array([-1.0]), np.array([3.0]))


def test_elliptic_roots_at_alpha_one():
    t1, t2 = elliptic_roots(np.array([1.0 + 0j]))
    assert t1[0] == pytest.approx(0.5 + 0.5j * np.sqrt(3), abs=1e-15)
    assert t2[0] == pytest.approx(0.5 - 0.5j * np.sqrt(3), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 1.95), st.floats(-np.pi, np.pi))
def test_elliptic_roots_unit_modulus(r, ang):
    alpha = np.array([r * np.exp(1j * ang)])
    t1, t2 = elliptic_roots(alpha)
    assert abs(abs(t1[0]) - 1) < 1e-12 and abs(abs(t2[0]) - 1) < 1e-12
    assert t1[0] + t2[0] == pytest.approx(alpha[0], abs=1e-12)
    assert t1[0] * t2[0] == pytest.approx(alpha[0] / np.conj(alpha[0]), abs=1e-12)


def test_elliptic_roots_reject_large_alpha():
    with pytest.raises(GeometryError):
        elliptic_roots(np.array([2.5 + 0j]))


def test_continuous_sqrt_has_no_jumps():
    ang = np.linspace(0, 3.5 * np.pi, 200)
    z = np.exp(1j * ang)[:, None] * np.ones((1, 5))
    r = _continuous_sqrt(z)
    assert np.allclose(r * r, z)
    assert np.abs(np.diff(r, axis=0)).max() < 0.1


@pytest.fixture(scope="module")
def member_triple():
    S = cs_surface(RunConfig(fd_order=2), 0.01)
    c = evaluate_candidate(CsCandidate("hyperbolic", U="const 1", V="const_V 1"), S)
    return S, reconstruct_bar_triple(c, S)


def test_roots_match_closed_form(member_triple):
    # V=1: alpha = beta = 2 + cosh^2 ut; values at ut = 0.3 frozen from a 30-digit evaluation
    S, T = member_triple
    i = S.chart.nearest_index(0, 0.3)
    assert T.tau1[i, 10] == pytest.approx(0.366854224130568098, abs=10 * S.h**2)
    assert T.tau2[i, 10] == pytest.approx(2.725878384990565747, abs=10 * S.h**2)


def test_member_triple_conditions(member_triple):
    S, T = member_triple
    rep = verify_bar_conditions(T, S)
    assert rep["ok"], rep
    assert rep["a_det"]["max"] < 1e-12
    assert np.allclose(np.linalg.det(T.D1), 0.5, atol=1e-14)


def test_equal_halves_fail_not_plus_minus(member_triple):
    S, _ = member_triple
    half = np.broadcast_to(np.eye(2) / SQ2, S.chart.shape + (2, 2))
    T = bar_triple_from_arrays(half, half, np.zeros(S.chart.shape + (2,)))
    rep = verify_bar_conditions(T, S)
    assert rep["a_det"]["ok"]
    assert not rep["d_not_pm"]["ok"]
    assert rep["d_not_pm"]["min"] <= 1e-10


def test_rank_deficient_fails_genuineness():
    # theta1^2 + theta2^2 = 2 makes D1^2 + D2^2 - I singular but nonzero
    t1 = 1.2
    D1, D2 = diag_pair(t1, np.sqrt(2 - t1 * t1))
    L = LiftedTriple(D1, D2, None, None, None, None, None, None)
    rep = genuineness_diagnostics(L)
    assert rep["rank_two"]["min"] <= 1e-10
    assert rep["not_plus_minus"]["min"] > 0.1
    with pytest.raises(GeometryError, match="rank_two"):
        check_genuine(L)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_margins_are_frame_invariant(t1, t2):
    D1, D2 = diag_pair(t1, t2, (1,))
    metric = np.array([[[2.0, 0.3], [0.3, 0.7]]])
    # the same endomorphisms in a metric-orthonormal frame give the same margins
    L = np.linalg.cholesky(metric)
    P = np.linalg.inv(np.swapaxes(L, -1, -2))
    m_a = genuineness_margins(P @ D1 @ np.linalg.inv(P), P @ D2 @ np.linalg.inv(P), metric)
    m_b = genuineness_margins(D1, D2, np.eye(2)[None])
    assert np.allclose(m_a, m_b, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (7, 7, 10), elements=st.floats(-2, 2)), arrays(float, (7, 7, 10), elements=st.floats(-2, 2)))
def test_distance_is_symmetric_and_sign_blind(a, b):
    Ta = bar_triple_from_arrays(a[..., :4].reshape(7, 7, 2, 2), a[..., 4:8].reshape(7, 7, 2, 2), a[..., 8:])
    Tb = bar_triple_from_arrays(b[..., :4].reshape(7, 7, 2, 2), b[..., 4:8].reshape(7, 7, 2, 2), b[..., 8:])
    assert triple_distance(Ta, Tb) == pytest.approx(triple_distance(Tb, Ta))
    swapped = bar_triple_from_arrays(Ta.D2, Ta.D1, -Ta.psi)
    flipped = bar_triple_from_arrays(-Ta.D1, Ta.D2, -Ta.psi)
    assert triple_distance(Ta, swapped) == 0.0
    assert triple_distance(Ta, flipped) == 0.0
    assert triple_distance(Ta, Ta) == 0.0


def test_flatness_holds_for_member_and_fails_off_det(member_run, mgeom):
    L = member_run["objs"]["lifted"]
    assert flatness_check(mgeom.geom, L)["ok"]
    bent = LiftedTriple(L.Dbar1 * np.sqrt(0.6 / 0.5), L.Dbar2, L.D1, L.D2, L.psi, L.J, L.omega1, L.omega2)
    rep = flatness_check(mgeom.geom, bent)
    assert not rep["ok"] and rep["relative_max"] > 1e-2


def test_lift_is_horizontal(member_run, mgeom):
    L = member_run["objs"]["lifted"]
    rep = verify_conditions_i_ix(L, mgeom.geom, margin=mgeom.margin)
    assert rep["i_leaf_psi"]["max"] == 0.0
    assert rep["iii_leaf_parallel"]["max"] == 0.0
    assert rep["symmetry_BD"]["ok"]


def test_closed_perturbation_is_invisible_to_vii(member_run, mgeom):
    # d(u) is closed, so psi + 0.01 du leaves d psi unchanged
    L = member_run["objs"]["lifted"]
    base = verify_conditions_i_ix(L, mgeom.geom, margin=mgeom.margin)["vii_dpsi"]["max"]
    P = perturb_psi(L, mgeom.geom, lambda u, v: np.stack([0.01 + 0 * u, 0 * v], -1))
    moved = verify_conditions_i_ix(P, mgeom.geom, margin=mgeom.margin)["vii_dpsi"]["max"]
    assert moved == pytest.approx(base, rel=1e-6, abs=1e-12)
