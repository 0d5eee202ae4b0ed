import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confdef.errors import GeometryError
from confdef.grid import GridChart, crop, d1, d2, d11, rk4_linear, transport_from_seed


def test_chart_from_ranges():
    ch = GridChart.from_ranges([(0.0, 1.0), (-1.0, 1.0)], (11, 21))
    assert ch.spacings == pytest.approx((0.1, 0.1))
    assert ch.axis(1)[0] == -1.0 and ch.axis(1)[-1] == pytest.approx(1.0)


def test_chart_minimum_samples():
    with pytest.raises(GeometryError):
        GridChart.from_ranges([(0, 1), (0, 1)], (4, 10))
    GridChart.from_ranges([(0, 1), (0, 1)], (4, 10), strict=False)


def test_chart_dict_roundtrip_keeps_strictness():
    ch = GridChart((0.0, 0.0, 1.0), (0.1, 0.1, 0.1), (8, 8, 1), strict=False)
    assert GridChart.from_dict(ch.to_dict()) == ch


def test_crop_chart_matches_crop_field():
    ch = GridChart.from_ranges([(0, 1), (0, 2)], (11, 21))
    f = ch.mesh()[1]
    sub = ch.crop((1,), 3)
    assert np.allclose(crop(f, (1,), 3), sub.mesh()[1])


@pytest.mark.parametrize("order,degree", [(2, 2), (4, 4)])
def test_first_derivative_exact_on_polynomials(order, degree):
    x = np.linspace(-1, 1, 17)
    h = x[1] - x[0]
    f = sum((k + 1) * x**k for k in range(degree + 1))
    df = sum(k * (k + 1) * x ** (k - 1) for k in range(1, degree + 1))
    assert np.allclose(d1(f, 0, h, order), df, atol=1e-11)


@pytest.mark.parametrize("order,degree", [(2, 3), (4, 5)])
def test_second_derivative_exact_on_polynomials(order, degree):
    # one-sided second differences are exact one degree lower than the centred ones
    degree = degree - 1
    x = np.linspace(-1, 1, 17)
    h = x[1] - x[0]
    f = sum(x**k for k in range(degree + 1))
    ddf = sum(k * (k - 1) * x ** (k - 2) for k in range(2, degree + 1))
    assert np.allclose(d2(f, 0, h, order), ddf, atol=1e-9)


def test_mixed_derivative_exact_on_bilinear_quadratic():
    ch = GridChart.from_ranges([(0, 1), (0, 1)], (9, 9))
    U, V = ch.mesh()
    f = 3 * U * V + U * U * V
    h = ch.spacings
    assert np.allclose(d11(f, 0, 1, h[0], h[1]), 3 + 2 * U, atol=1e-10)


@pytest.mark.parametrize("order", [2, 4])
def test_derivative_convergence_order(order):
    errs = []
    for N in (41, 81):
        x = np.linspace(0, 2, N)
        h = x[1] - x[0]
        errs.append(np.abs(d1(np.sin(3 * x), 0, h, order) - 3 * np.cos(3 * x)).max())
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.35)


def test_rk4_linear_matches_exponential():
    # y' = a y on [0, 1]
    N = 41
    h = 1.0 / (N - 1)
    a = 0.7
    k_nodes = np.full((N, 1, 1), a)
    k_mid = np.full((N - 1, 1, 1), a)
    y = rk4_linear(k_nodes, k_mid, np.ones((1, 1)), h)
    assert abs(y[-1, 0, 0] - np.exp(a)) < 1e-8


def test_transport_from_interior_seed():
    N = 21
    h = 0.05
    x = h * (np.arange(N) - 7)
    k = np.broadcast_to(x[:, None, None], (N, 1, 1)).copy()
    km = (0.5 * (x[1:] + x[:-1]))[:, None, None]
    y = transport_from_seed(k, km, np.ones((1, 1)), h, 7)
    assert np.allclose(y[:, 0, 0], np.exp(0.5 * x**2), atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_fourth_order_exact_on_quartic_in_two_axes(a, b, c):
    ch = GridChart.from_ranges([(-1, 1), (-1, 1)], (9, 11))
    U, V = ch.mesh()
    f = a * U**4 + b * U * V**3 + c
    hu, hv = ch.spacings
    assert np.allclose(d1(f, 0, hu, 4), 4 * a * U**3 + b * V**3, atol=1e-9 * (1 + abs(a) + abs(b)))
    assert np.allclose(d1(f, 1, hv, 4), 3 * b * U * V**2, atol=1e-9 * (1 + abs(b)))
