"""Surfaces in de Sitter space sampled on a (u, v) grid.

The surface s takes values among unit space-like vectors of a Minkowski
space.  Metric, Christoffel symbols and the normal part of the second
derivatives are all obtained from finite-difference jets.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import DEFAULT
from .errors import GeometryError, first_bad_index
from .grid import crop, d1, d11
from .lorentz import minkowski_dot

J_HYPERBOLIC = np.diag([1.0, -1.0])
J_ELLIPTIC = np.array([[0.0, -1.0], [1.0, 0.0]])
J_PARABOLIC = np.array([[0.0, 1.0], [0.0, 0.0]])


class SurfaceChart:
    """Grid samples of s: L^2 -> S_{1,1}, plus derived first- and second-order data.

    ``source`` optionally keeps a callable s(u, v) so that reparametrisations
    can resample exactly instead of interpolating; ``jet`` a callable
    returning (s, s_u, s_v) in closed form.  ``fd_order`` (2 or 4) sets the
    order of the finite differences behind the derived data.
    """

    def __init__(self, chart, positions, source=None, meta=None, jet=None, fd_order=2):
        positions = np.asarray(positions, dtype=float)
        if chart.ndim != 2 or positions.shape[:2] != chart.shape:
            raise GeometryError("surface positions do not match the (u,v) chart")
        self.chart = chart
        self.positions = positions
        self.source = source
        self.jet = jet
        self.meta = dict(meta or {})
        self.fd_order = fd_order

    @property
    def h(self):
        return self.chart.h

    def unit_residual(self):
        return float(np.max(np.abs(minkowski_dot(self.positions, self.positions) - 1.0)))

    @cached_property
    def first(self):
        hu, hv = self.chart.spacings
        o = self.fd_order
        return d1(self.positions, 0, hu, o), d1(self.positions, 1, hv, o)

    @cached_property
    def second(self):
        hu, hv = self.chart.spacings
        s = self.positions
        o = self.fd_order
        return d11(s, 0, 0, hu, hu, o, o), d11(s, 0, 1, hu, hv, o, o), d11(s, 1, 1, hv, hv, o, o)

    @cached_property
    def metric(self):
        """(..., 2, 2) induced metric [[E, F], [F, G]]."""
        su, sv = self.first
        E = minkowski_dot(su, su)
        F = minkowski_dot(su, sv)
        G = minkowski_dot(sv, sv)
        g = np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)
        det = E * G - F * F
        bad = ~(det > 0)
        if np.any(bad):
            raise GeometryError("surface metric degenerate", index=first_bad_index(bad))
        return g

    @property
    def E(self):
        return self.metric[..., 0, 0]

    @property
    def F(self):
        return self.metric[..., 0, 1]

    @property
    def G(self):
        return self.metric[..., 1, 1]

    @cached_property
    def christoffel(self):
        """Gamma[..., k, i, j] = Gamma^k_ij of the induced metric."""
        su, sv = self.first
        tangents = (su, sv)
        suu, suv, svv = self.second
        sec = {(0, 0): suu, (0, 1): suv, (1, 0): suv, (1, 1): svv}
        rhs = np.empty(self.chart.shape + (2, 2, 2))
        for i in range(2):
            for j in range(2):
                for l in range(2):
                    rhs[..., l, i, j] = minkowski_dot(sec[(i, j)], tangents[l])
        ginv = np.linalg.inv(self.metric)
        return np.einsum("...kl,...lij->...kij", ginv, rhs)

    @property
    def gamma1(self):
        """Coefficient of d_u in nabla_{d_u} d_v."""
        return self.christoffel[..., 0, 0, 1]

    @property
    def gamma2(self):
        """Coefficient of d_v in nabla_{d_u} d_v."""
        return self.christoffel[..., 1, 0, 1]

    @cached_property
    def normal_second(self):
        """Normal parts of s_uu, s_uv, s_vv inside de Sitter space."""
        su, sv = self.first
        g = self.metric
        gam = self.christoffel
        s = self.positions
        out = []
        for (i, j), sij in zip(((0, 0), (0, 1), (1, 1)), self.second):
            val = sij - gam[..., 0, i, j][..., None] * su - gam[..., 1, i, j][..., None] * sv
            val = val + g[..., i, j][..., None] * s
            out.append(val)
        return tuple(out)

    def complex_christoffel(self):
        """Gamma with nabla_{dz} d_zbar = Gamma dz + conj(Gamma) d_zbar."""
        gam = self.christoffel
        a = gam[..., 0, 0, 0] + gam[..., 0, 1, 1]
        b = gam[..., 1, 0, 0] + gam[..., 1, 1, 1]
        return (a + 1j * b) / 4.0


def interior(field, margin=2, axes=(0, 1)):
    return crop(field, axes, margin)


@dataclass
class ConjugateStructure:
    kind: str
    J: np.ndarray
    residuals: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def square_residual(self):
        target = {"hyperbolic": np.eye(2), "elliptic": -np.eye(2), "parabolic": np.zeros((2, 2))}.get(self.kind)
        if target is None:
            return float("nan")
        return float(np.max(np.abs(self.J @ self.J - target)))


def _coord_norm(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def classify_conjugate(S, tol=DEFAULT, margin=2):
    """Decide whether (u,v) are real- or complex-conjugate coordinates of s."""
    nuu, nuv, nvv = (interior(x, margin) for x in S.normal_second)
    r_hyp = float(np.max(_coord_norm(nuv)))
    r_ell = float(np.max(_coord_norm(nuu + nvv)))
    r_par_u = float(np.max(_coord_norm(nuu)))
    r_par_v = float(np.max(_coord_norm(nvv)))
    scale = max(r_hyp, r_par_u, r_par_v)
    bar = tol.disc(S.h)
    res = {
        "hyperbolic": r_hyp,
        "elliptic": r_ell,
        "parabolic_u": r_par_u,
        "parabolic_v": r_par_v,
        "scale": scale,
        "threshold": bar,
    }
    if scale <= bar:
        return ConjugateStructure("none", np.zeros((2, 2)), res, ["degenerate: second fundamental form vanishes, every structure fits"])
    notes = []
    if min(r_par_u, r_par_v) <= bar:
        notes.append("an asymptotic coordinate direction exists (parabolic-compatible)")
    if r_hyp <= bar:
        return ConjugateStructure("hyperbolic", J_HYPERBOLIC.copy(), res, notes)
    if r_ell <= bar:
        return ConjugateStructure("elliptic", J_ELLIPTIC.copy(), res, notes)
    if r_par_u <= bar:
        return ConjugateStructure("parabolic", J_PARABOLIC.copy(), res, notes)
    if r_par_v <= bar:
        return ConjugateStructure("parabolic", J_PARABOLIC.T.copy(), res, notes)
    notes.append("no conjugate structure within tolerance in these coordinates")
    return ConjugateStructure("none", np.zeros((2, 2)), res, notes)


def conjugate_christoffels(S, kind="hyperbolic"):
    """(Gamma1, Gamma2) for real-conjugate charts, complex Gamma otherwise."""
    if kind == "hyperbolic":
        return S.gamma1, S.gamma2
    if kind == "elliptic":
        return S.complex_christoffel()
    raise GeometryError(f"Christoffels requested for conjugate kind {kind!r}")


def q_operator(theta, S, kind="hyperbolic"):
    """Q(theta) = Hess theta(d_u, d_v) + F theta, or its complex analogue."""
    hu, hv = S.chart.spacings
    theta = np.asarray(theta, dtype=float)
    tu = d1(theta, 0, hu)
    tv = d1(theta, 1, hv)
    if kind == "hyperbolic":
        tuv = d11(theta, 0, 1, hu, hv)
        return tuv - S.gamma1 * tu - S.gamma2 * tv + S.F * theta
    if kind == "elliptic":
        lap = d11(theta, 0, 0, hu, hu) + d11(theta, 1, 1, hv, hv)
        tz = 0.5 * (tu - 1j * tv)
        gam = S.complex_christoffel()
        return 0.25 * lap - 2.0 * np.real(gam * tz) + 0.25 * (S.E + S.G) * theta
    raise GeometryError(f"Q is undefined for conjugate kind {kind!r}")


def surface_from_function(func, chart, meta=None, jet=None, fd_order=2):
    """Sample a vectorised s(u, v) on a chart."""
    U, V = chart.mesh()
    return SurfaceChart(chart, func(U, V), source=func, meta=meta, jet=jet, fd_order=fd_order)


def flat_chart_surface(chart, dim=5):
    """s(u,v) = (0, cos u, sin u, cos v, sin v)/sqrt2 padded: a flat torus in S^3."""

    def func(u, v):
        out = np.zeros(np.shape(u) + (dim,))
        r = 1.0 / np.sqrt(2.0)
        out[..., 1] = r * np.cos(np.sqrt(2.0) * u)
        out[..., 2] = r * np.sin(np.sqrt(2.0) * u)
        out[..., 3] = r * np.cos(np.sqrt(2.0) * v)
        out[..., 4] = r * np.sin(np.sqrt(2.0) * v)
        return out

    return surface_from_function(func, chart, {"name": "flat torus"})


def rotated_torus_surface(chart, angle=np.pi / 6, dim=5):
    """Flat torus with (u,v) rotated by ``angle``: complex-conjugate coordinates."""
    c, s_ = np.cos(angle), np.sin(angle)

    def func(u, v):
        a = c * u - s_ * v
        b = s_ * u + c * v
        out = np.zeros(np.shape(u) + (dim,))
        r = 1.0 / np.sqrt(2.0)
        out[..., 1] = r * np.cos(np.sqrt(2.0) * a)
        out[..., 2] = r * np.sin(np.sqrt(2.0) * a)
        out[..., 3] = r * np.cos(np.sqrt(2.0) * b)
        out[..., 4] = r * np.sin(np.sqrt(2.0) * b)
        return out

    return surface_from_function(func, chart, {"name": "rotated flat torus", "angle": angle})
