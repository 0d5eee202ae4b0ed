import numpy as np
import pytest

from confdef.config import RunConfig
from confdef.cs_solver import (
    CsCandidate,
    eval_expr,
    evaluate_candidate,
    parse_expr,
    rho_field,
    sign_conditions,
    transport_elliptic,
)
from confdef.errors import GeometryError
from confdef.surface import q_operator
from confdef.workflow import cs_surface


@pytest.fixture(scope="module")
def S():
    return cs_surface(RunConfig(), 0.01)


def sech2(S):
    return (1 / np.cosh(S.chart.axis(0)) ** 2)[:, None]


def test_parse_forms():
    assert parse_expr("const 2") == {"const": 2.0}
    assert parse_expr("poly 1 0 1") == {"poly": [1.0, 0.0, 1.0]}
    assert parse_expr(3.0) == {"const": 3.0}
    assert parse_expr({"U_from_lambda": 2.0}) == {"U_from_lambda": 2.0}
    assert parse_expr({"poly": [0.1, [0, 0.2]]}) == {"poly": [0.1, 0.2j]}
    for bad in ("cosh 2", "poly", "const x", {"nope": 1}):
        with pytest.raises(GeometryError):
            parse_expr(bad)


def test_eval_forms():
    x = np.linspace(-1, 1, 5)
    assert np.allclose(eval_expr("poly 1 0 2", x), 1 + 2 * x**2)
    E = np.full(5, 0.25)
    assert np.allclose(eval_expr({"U_from_lambda": 3.0}, x, E), 3.0 - 0.5 / 0.25)
    with pytest.raises(GeometryError):
        eval_expr({"U_from_lambda": 3.0}, x)
    with pytest.raises(GeometryError):
        eval_expr([1.0, 2.0], x)


def test_candidate_from_dict_validation():
    with pytest.raises(GeometryError):
        CsCandidate.from_dict({"kind": "hyperbolic", "U": "const 1"})
    with pytest.raises(GeometryError):
        CsCandidate.from_dict({"kind": "weird"})


def test_constant_member_rho_closed_form(S):
    # phi^U = phi^V = sech^2 ut, so rho = sqrt(4 sech^2 ut + 1)
    c = evaluate_candidate(CsCandidate("hyperbolic", U="const 1", V="const_V 1"), S)
    want = np.sqrt(4 * sech2(S) + 1) * np.ones(S.chart.shape)
    assert np.abs(c.rho - want).max() < 10 * S.h**2  # E on the seed lines is a finite difference
    assert c.verdict and c.branch == "U,V>0"


def test_lambda_member_rho_closed_form(S):
    # U = 2 - e^{-2 lam}/2, V = 1 + v^2: rho^2 = 2 sech^2 ut (3 + v^2)
    c = evaluate_candidate(CsCandidate("hyperbolic", U={"U_from_lambda": 2.0}, V="poly 1 0 1"), S)
    v = S.chart.axis(1)[None, :]
    want = np.sqrt(2 * sech2(S) * (3 + v**2))
    assert np.abs(c.rho - want).max() < 10 * S.h**2  # E on the seed lines is a finite difference
    assert c.verdict


def test_non_member_q_matches_symbolic_values(S):
    # Q(rho) for U = 1+u^2, V = 1+v^2 at three points, frozen from a symbolic computation
    c = evaluate_candidate(CsCandidate("hyperbolic", U="poly 1 0 1", V="poly 1 0 1"), S)
    assert not c.verdict
    q = q_operator(c.rho, S)
    frozen = {(0.2, 0.3): (-0.029178856431594579, 2.2569986946021161), (-0.35, 0.1): (0.016233004366473867, 2.1868748520161003), (0.4, -0.45): (0.072384011974136658, 2.2456387207726816)}
    for (u, v), (qv, rv) in frozen.items():
        i, j = S.chart.nearest_index(0, u), S.chart.nearest_index(1, v)
        assert c.rho[i, j] == pytest.approx(rv, abs=10 * S.h**2)
        assert q[i, j] == pytest.approx(qv, abs=10 * S.h**2 * rv)
    assert c.residual == pytest.approx(0.0850433903437, rel=2e-3)


def test_unnormalised_convention_changes_verdict(S):
    c = evaluate_candidate(CsCandidate("hyperbolic", U={"U_from_lambda": 2.0}, V="poly 1 0 1", normalize_by_conformal_factor=False), S)
    assert c.residual is None or c.residual > 1e-3


def test_sign_branches():
    pu = np.array([0.3, 0.2])
    pv = np.array([-1.0, -1.5])
    valid, branch = sign_conditions(pu, pv)
    assert valid.all() and branch == "0<2U<-(2V+1)"
    valid, branch = sign_conditions(np.array([-1.0]), np.array([-1.0]))
    assert not valid.any() and branch is None


def test_rho_rejects_vanishing_radicand():
    with pytest.raises(GeometryError):
        rho_field(np.array([0.25]), np.array([-0.75]))


def test_failed_sign_conditions_are_reported(S):
    c = evaluate_candidate(CsCandidate("hyperbolic", U="const -1", V="const_V -1"), S)
    assert c.verdict is False and c.report["reason"] == "sign conditions fail"


def test_membership_verdict_is_scale_stable():
    cfg = RunConfig()
    for spec in cfg.candidates:
        verdicts = []
        for h in (0.02, 0.01):
            c = evaluate_candidate(CsCandidate.from_dict(spec), cs_surface(cfg, h))
            verdicts.append(bool(c.verdict))
        assert verdicts[0] == verdicts[1] == (spec["expect"] == "member")


def test_elliptic_transport_reports_growth(S):
    phi, info = transport_elliptic("const -1", S, gamma=0.0)
    # zero Christoffel and constant data: phi stays constant
    assert np.allclose(phi, -1.0)
    assert info["growth_bound"] > 1.0
