"""Sphere congruences, their de Sitter surfaces, and the way back.

Going down: a hypersurface with a principal curvature of multiplicity n-2
carries the congruence of its curvature spheres, a map into the unit
space-like vectors that is constant along the leaves.  Going up: a surface
s in that de Sitter space is enveloped by the light-like points orthogonal
to s, s_u and s_v, one round (n-2)-sphere per (u, v).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .config import DEFAULT
from .errors import GeometryError, first_bad_index
from .grid import GridChart, crop, d1
from .hypersurface import HypersurfaceChart
from .lorentz import LightConeModel, euclidean_coords, metric_signature, minkowski_dot, psi_embed, psi_push
from .surface import SurfaceChart, surface_from_function

# -- curves -------------------------------------------------------------------


@dataclass(frozen=True)
class CircleSumCurve:
    """alpha(v) = (c_1 cos w_1 v, c_1 sin w_1 v, ..., offset) on the unit sphere.

    Unit length needs sum c^2 + offset^2 = 1, unit speed sum c^2 w^2 = 1.
    """

    amplitudes: tuple
    frequencies: tuple
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.amplitudes, float)
        w = np.asarray(self.frequencies, float)
        if c.shape != w.shape or c.size == 0:
            raise GeometryError("circle curve needs matching non-empty amplitude and frequency lists")
        if abs(np.sum(c * c) + self.offset**2 - 1.0) > 1e-10:
            raise GeometryError("circle curve does not lie on the unit sphere")
        if abs(np.sum(c * c * w * w) - 1.0) > 1e-10:
            raise GeometryError("circle curve is not unit speed")

    @property
    def dim(self):
        return 2 * len(self.amplitudes) + (1 if self.offset != 0.0 else 0)

    def _eval(self, v, order):
        v = np.asarray(v, float)
        parts = []
        for c, w in zip(self.amplitudes, self.frequencies):
            cos, sin = np.cos(w * v), np.sin(w * v)
            if order == 0:
                parts += [c * cos, c * sin]
            else:
                parts += [-c * w * sin, c * w * cos]
        if self.offset != 0.0:
            parts.append(np.full(v.shape, self.offset if order == 0 else 0.0))
        return np.stack(parts, axis=-1)

    def __call__(self, v):
        return self._eval(v, 0)

    def derivative(self, v):
        return self._eval(v, 1)

    @classmethod
    def balanced(cls, dim, offset=None):
        """A deterministic generic curve in S^{dim-1}: decaying amplitudes, spread frequencies."""
        q = dim // 2
        if q < 1:
            raise GeometryError("circle curve needs dimension >= 2")
        if offset is None:
            offset = 0.6 if dim % 2 else 0.0
        weights = 0.55 ** np.arange(q)
        c = weights * np.sqrt((1.0 - offset**2) / np.sum(weights**2))
        w = 1.0 + 0.45 * np.arange(q)
        w = w / np.sqrt(np.sum(c * c * w * w))
        return cls(tuple(float(x) for x in c), tuple(float(x) for x in w), float(offset))

    def to_dict(self):
        return {"name": "circles", "amplitudes": list(self.amplitudes), "frequencies": list(self.frequencies), "offset": self.offset}


def _gd(x):
    return np.arctan(np.sinh(x))


@dataclass(frozen=True)
class RuledBetaCurve:
    """beta(u) = cos u * e + sin u * gamma(u) in L^4 with coordinates (t, e, a, b).

    gamma(x) = (sinh kx, cosh kx cos gd(kx), cosh kx sin gd(kx)) is a unit
    space-like curve orthogonal to e with light-like velocity, which makes
    beta unit speed for every rate k.  k = 0 gives beta = (0, cos u, sin u, 0).
    """

    rate: float = 1.0

    def _gamma(self, u):
        x = self.rate * u
        g = _gd(x)
        ch = np.cosh(x)
        return np.stack([np.sinh(x), ch * np.cos(g), ch * np.sin(g)], axis=-1)

    def _dgamma(self, u):
        x = self.rate * u
        g = _gd(x)
        # cosh(x) * gd'(x) = 1
        return self.rate * np.stack([np.cosh(x), np.sinh(x) * np.cos(g) - np.sin(g), np.sinh(x) * np.sin(g) + np.cos(g)], axis=-1)

    def __call__(self, u):
        u = np.asarray(u, float)
        gam = self._gamma(u)
        sn = np.sin(u)[..., None]
        return np.stack([sn[..., 0] * gam[..., 0], np.cos(u), sn[..., 0] * gam[..., 1], sn[..., 0] * gam[..., 2]], axis=-1)

    def derivative(self, u):
        u = np.asarray(u, float)
        gam = self._gamma(u)
        dg = self._dgamma(u)
        sn, cs = np.sin(u)[..., None], np.cos(u)[..., None]
        rest = cs * gam + sn * dg
        return np.stack([rest[..., 0], -np.sin(u), rest[..., 1], rest[..., 2]], axis=-1)

    def rho(self, u):
        return np.cos(np.asarray(u, float))

    def to_dict(self):
        return {"name": "ruled", "rate": self.rate}


def _curve_from_dict(data):
    name = data.get("name")
    if name == "circles":
        return CircleSumCurve(tuple(data["amplitudes"]), tuple(data["frequencies"]), float(data.get("offset", 0.0)))
    if name == "ruled":
        return RuledBetaCurve(float(data.get("rate", 1.0)))
    raise GeometryError(f"unknown curve built-in {name!r}")


@dataclass(frozen=True)
class ExampleSurfaceSpec:
    """s(u, v) = phi_v(beta(u)) where phi_v turns the e-axis along alpha.

    Coordinates of the ambient Minkowski space are laid out as
    (t, alpha-block, a, b, zero padding); the e-component of beta is spread
    over the alpha-block as beta_e * alpha(v).
    """

    alpha: CircleSumCurve
    beta: RuledBetaCurve
    dim: int = 0

    def __post_init__(self):
        if self.dim and self.dim < self.natural_dim:
            raise GeometryError(f"ambient dimension {self.dim} is below the {self.natural_dim} the curves need")

    @property
    def natural_dim(self):
        return 1 + self.alpha.dim + 2

    @property
    def ambient_dim(self):
        return self.dim or self.natural_dim

    def _assemble(self, bt, be_alpha, ba, bb):
        shape = np.shape(bt)
        out = np.zeros(shape + (self.ambient_dim,))
        m1 = self.alpha.dim
        out[..., 0] = bt
        out[..., 1 : 1 + m1] = be_alpha
        out[..., 1 + m1] = ba
        out[..., 2 + m1] = bb
        return out

    def __call__(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        b = self.beta(u)
        return self._assemble(b[..., 0], b[..., 1, None] * self.alpha(v), b[..., 2], b[..., 3])

    def jet(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        b = self.beta(u)
        db = self.beta.derivative(u)
        a = self.alpha(v)
        da = self.alpha.derivative(v)
        s = self._assemble(b[..., 0], b[..., 1, None] * a, b[..., 2], b[..., 3])
        su = self._assemble(db[..., 0], db[..., 1, None] * a, db[..., 2], db[..., 3])
        zero = np.zeros(u.shape)
        sv = self._assemble(zero, b[..., 1, None] * da, zero, zero)
        return s, su, sv

    def rho(self, u):
        return self.beta.rho(u)

    def to_dict(self):
        return {"alpha": self.alpha.to_dict(), "beta": self.beta.to_dict(), "dim": self.ambient_dim}

    @classmethod
    def from_dict(cls, data):
        return cls(_curve_from_dict(data["alpha"]), _curve_from_dict(data["beta"]), int(data.get("dim", 0)))


def gallery_spec(n=6, variant="generic", rate=0.5):
    """Built-in example surfaces in the de Sitter space of L^{n+3}.

    ``literal``: a great circle with beta = (0, cos u, sin u); its
    congruence is totally geodesic and has no regular envelope.
    ``generic``: same intrinsic metric du^2 + cos^2 u dv^2, but alpha spans
    all of R^n and beta bends out of its plane, so the envelope is a
    hypersurface that is not conformally surface-like.
    """
    if n < 3:
        raise GeometryError("gallery hypersurfaces need n >= 3")
    if variant == "literal":
        alpha = CircleSumCurve((1.0,), (1.0,), 0.0)
        return ExampleSurfaceSpec(alpha, RuledBetaCurve(0.0), n + 3)
    if variant == "generic":
        return ExampleSurfaceSpec(CircleSumCurve.balanced(n), RuledBetaCurve(rate), n + 3)
    raise GeometryError(f"unknown gallery variant {variant!r}")


def example_surface(spec, chart, fd_order=2):
    """Sample s(u, v) = phi_v(beta(u)) on a (u, v) chart."""
    U, _ = chart.mesh()
    rho = spec.rho(U)
    bad = ~(rho > 0)
    if np.any(bad):
        raise GeometryError("rho <= 0: beta leaves the admissible half-space", index=first_bad_index(bad))
    return surface_from_function(spec, chart, meta={"spec": spec.to_dict()}, jet=spec.jet, fd_order=fd_order)


# -- isothermal coordinates ---------------------------------------------------


class IsothermalMap:
    """u <-> ut with ut(u) = int_0^u ds / rho(s)."""

    def __init__(self, rho, u_lo, u_hi, panels=256):
        self.rho = rho
        self.panels = panels
        self.u_lo, self.u_hi = float(u_lo), float(u_hi)
        probe = np.linspace(self.u_lo, self.u_hi, 4 * panels + 1)
        bad = ~(np.asarray(rho(probe)) > 0)
        if np.any(bad):
            raise GeometryError("quadrature domain exits rho > 0", index=first_bad_index(bad))

    def forward(self, u):
        u = float(u)
        if u == 0.0:
            return 0.0
        x = np.linspace(0.0, u, 2 * self.panels + 1)
        return float(simpson(1.0 / self.rho(x), x=x))

    def inverse(self, ut):
        ut = float(ut)
        lo, hi = self.forward(self.u_lo), self.forward(self.u_hi)
        if not (lo - 1e-12 <= ut <= hi + 1e-12):
            raise GeometryError(f"isothermal coordinate {ut} outside [{lo}, {hi}]")
        if abs(ut - lo) <= 1e-12:
            return self.u_lo
        if abs(ut - hi) <= 1e-12:
            return self.u_hi
        return brentq(lambda u: self.forward(u) - ut, self.u_lo, self.u_hi, xtol=1e-15, rtol=1e-15)

    def inverse_many(self, uts):
        flat = np.ravel(uts)
        uniq, back = np.unique(flat, return_inverse=True)
        vals = np.array([self.inverse(t) for t in uniq])
        return vals[back].reshape(np.shape(uts))


def isothermal_reparam(S, rho=None, chart=None):
    """Resample a surface with metric du^2 + rho(u)^2 dv^2 in isothermal coordinates.

    The new metric is e^{2 lam}(dut^2 + dv^2) with e^lam = rho(u(ut)).
    ``chart`` selects the (ut, v) grid; by default it spans the image of the
    original u-range with the same sample counts.
    """
    if S.source is None:
        raise GeometryError("isothermal reparametrisation needs a surface with a source function")
    if rho is None:
        if "spec" not in S.meta:
            raise GeometryError("no rho supplied and the surface carries no example definition")
        rho = ExampleSurfaceSpec.from_dict(S.meta["spec"]).rho
    u_axis = S.chart.axis(0)
    iso = IsothermalMap(rho, min(u_axis[0], 0.0), max(u_axis[-1], 0.0))
    if chart is None:
        lo, hi = iso.forward(u_axis[0]), iso.forward(u_axis[-1])
        chart = GridChart.from_ranges([(lo, hi), (S.chart.starts[1], S.chart.starts[1] + S.chart.spacings[1] * (S.chart.counts[1] - 1))], S.chart.shape)
    ut_axis = chart.axis(0)
    u_of = iso.inverse_many(ut_axis)
    lam = np.log(rho(u_of))
    v_axis = chart.axis(1)
    UU, VV = np.meshgrid(u_of, v_axis, indexing="ij")
    positions = S.source(UU, VV)
    source = S.source

    def resampled(ut, v):
        return source(iso.inverse_many(ut), v)

    src_jet = S.jet

    def resampled_jet(ut, v):
        u = iso.inverse_many(ut)
        s, su, sv = src_jet(u, v)
        return s, rho(u)[..., None] * su, sv

    jet = resampled_jet if src_jet is not None else None

    meta = dict(S.meta, isothermal=True)
    out = SurfaceChart(chart, positions, source=resampled, meta=meta, jet=jet, fd_order=S.fd_order)
    out.lam = lam
    out.u_of = u_of
    return out


# -- envelope -----------------------------------------------------------------


def _lorentz_gram(vectors):
    """Gram matrix (..., k, k) of a stack of vectors (..., k, d)."""
    eta = metric_signature(vectors.shape[-1])
    return np.einsum("...id,d,...jd->...ij", vectors, eta, vectors)


def _project_out(x, basis, gram_inv):
    """Remove from x (..., d) its component in span(basis) (..., k, d)."""
    eta = metric_signature(x.shape[-1])
    coef = np.einsum("...ij,...jd,d,...d->...i", gram_inv, basis, eta, x)
    return x - np.einsum("...i,...id->...d", coef, basis)


def sphere_points(angles):
    """Hyperspherical coordinates: (..., k) angles -> (..., k+1) unit vectors."""
    angles = np.asarray(angles, float)
    k = angles.shape[-1]
    out = np.empty(angles.shape[:-1] + (k + 1,))
    prod = np.ones(angles.shape[:-1])
    for j in range(k):
        out[..., j] = prod * np.cos(angles[..., j])
        prod = prod * np.sin(angles[..., j])
    out[..., k] = prod
    return out


@dataclass
class EnvelopeFrame:
    """Per-(u, v) data of the envelope construction."""

    center: np.ndarray
    radius: np.ndarray
    basis: np.ndarray
    pivots: tuple
    pivot_min: float
    steer: dict = None


def _regular_direction(center, radius, proj_E, suu, svv, signs=None):
    """Unit vector field y in E keeping <c + r y, s_uu> and <c + r y, s_vv> away from zero.

    Those two numbers control the horizontal differential of the envelope,
    so a leaf patch centred at y stays clear of its singular locus.  The
    weight and sign pair are global: the choice maximising the worst
    clearance over the chart.
    """
    a, b = proj_E(suu), proj_E(svv)
    a = a / np.sqrt(minkowski_dot(a, a))[..., None]
    b = b / np.sqrt(minkowski_dot(b, b))[..., None]

    def candidate(wa, sa, sb):
        y = sa * wa * a + sb * b
        return y / np.sqrt(minkowski_dot(y, y))[..., None]

    def score(y):
        p = center + radius[..., None] * y
        return np.minimum(
            np.abs(minkowski_dot(p, suu)) / np.linalg.norm(suu, axis=-1),
            np.abs(minkowski_dot(p, svv)) / np.linalg.norm(svv, axis=-1),
        )

    if signs is None:
        options = [(wa, sa, sb) for wa in (0.25, 0.5, 1.0, 2.0) for sa in (1.0, -1.0) for sb in (1.0, -1.0)]
        signs = max(options, key=lambda sg: score(candidate(*sg)).min())
    y = candidate(*signs)
    return y, signs, score(y)


def _second_from_source(source, U, V, delta=1e-3):
    """s_uu and s_vv of a callable surface by fourth-order central differences."""
    w = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * delta * delta)
    offs = delta * np.arange(-2, 3)
    suu = sum(c * source(U + o, V) for c, o in zip(w, offs))
    svv = sum(c * source(U, V + o) for c, o in zip(w, offs))
    return suu, svv


def envelope_frame(s, su, sv, model, suu=None, svv=None):
    """Centre, radius and an orthonormal basis of span{s, s_u, s_v, w}^perp.

    The basis comes from Gram-Schmidt applied to vectors fixed once at the
    middle sample, so it varies smoothly over the chart.  With second
    derivatives supplied, the last basis vector (the leaf-chart centre) is
    steered away from the singular locus of the envelope.
    """
    d = s.shape[-1]
    span3 = np.stack([s, su, sv], axis=-2)
    g3 = _lorentz_gram(span3)
    ev = np.linalg.eigvalsh(g3)
    bad = ~(ev[..., 0] > 1e-12)
    if np.any(bad):
        raise GeometryError("span{s, s_u, s_v} is not space-like of rank 3", index=first_bad_index(bad), stage="envelope")
    wB = _project_out(np.broadcast_to(model.w, s.shape), span3, np.linalg.inv(g3))
    kappa2 = -minkowski_dot(wB, wB)
    bad = ~(kappa2 > 1e-14)
    if np.any(bad):
        raise GeometryError("w is not time-like modulo span{s, s_u, s_v}", index=first_bad_index(bad), stage="envelope")
    center = -wB / kappa2[..., None]
    radius = 1.0 / np.sqrt(kappa2)

    span4 = np.concatenate([span3, np.broadcast_to(model.w, s.shape)[..., None, :]], axis=-2)
    g4inv = np.linalg.inv(_lorentz_gram(span4))
    k = d - 4
    mid = tuple(n // 2 for n in s.shape[:-1])
    proj_mid = lambda x: _project_out(x, span4[mid], g4inv[mid])

    seeds, done, steer = [], [], None
    if suu is not None and svv is not None:
        y, signs, clearance = _regular_direction(center, radius, lambda x: _project_out(x, span4, g4inv), suu, svv)
        steer = {"signs": signs, "clearance_min": float(clearance.min())}
        seeds.append(y)
        done.append(y[mid])
    # deterministic pivoting: greedily take the standard vector with the largest remainder
    chosen = []
    while len(seeds) < k:
        best, best_vec, best_norm = None, None, -1.0
        for j in range(d):
            if j in chosen:
                continue
            x = proj_mid(np.eye(d)[j])
            for b in done:
                x = x - minkowski_dot(x, b) * b
            nrm = minkowski_dot(x, x)
            if nrm > best_norm:
                best, best_vec, best_norm = j, x, nrm
        chosen.append(best)
        seeds.append(np.eye(d)[best])
        done.append(best_vec / np.sqrt(best_norm))

    basis = []
    pivot_min = np.inf
    for seed in seeds:
        x = _project_out(np.broadcast_to(seed, s.shape), span4, g4inv)
        for b in basis:
            x = x - minkowski_dot(x, b)[..., None] * b
        nrm = minkowski_dot(x, x)
        pivot_min = min(pivot_min, float(np.min(nrm)))
        bad = ~(nrm > 1e-12)
        if np.any(bad):
            raise GeometryError("leaf basis pivot collapsed", index=first_bad_index(bad), stage="envelope")
        basis.append(x / np.sqrt(nrm)[..., None])
    if suu is not None and svv is not None:
        basis = basis[1:] + basis[:1]  # steered vector last: it is the chart centre
    return EnvelopeFrame(center, radius, np.stack(basis, axis=-2), tuple(chosen), pivot_min, steer)


def leaf_chart(n, counts, spacing):
    """Angular chart of the (n-2)-sphere leaves, centred on the equator."""
    counts = tuple(counts)
    if len(counts) != n - 2:
        raise GeometryError(f"need {n - 2} leaf axes, got {len(counts)}")
    sp = (spacing,) * len(counts) if np.isscalar(spacing) else tuple(spacing)
    return GridChart.centered((np.pi / 2,) * len(counts), sp, counts)


def envelope_reconstruct(S, leaf_counts, leaf_spacing, model=None):
    """Hypersurface enveloped by the sphere congruence s, sampled on (u, v, angles).

    Uses the closed-form jet of s when the surface carries one and finite
    differences otherwise.
    """
    n = 2 + len(leaf_counts)
    d = S.positions.shape[-1]
    if d != n + 3:
        raise GeometryError(f"surface lives in L^{d}; an n={n} envelope needs L^{n + 3}")
    if model is None:
        model = LightConeModel.canonical(n + 1)
    if model.dim != d:
        raise GeometryError("light-cone model dimension does not match the surface")
    if S.jet is not None:
        U, V = S.chart.mesh()
        s, su, sv = S.jet(U, V)
    else:
        s = S.positions
        su, sv = S.first
    if S.source is not None:
        U, V = S.chart.mesh()
        suu, svv = _second_from_source(S.source, U, V)
    else:
        suu, _, svv = S.second
    frame = envelope_frame(s, su, sv, model, suu, svv)
    lc = leaf_chart(n, leaf_counts, leaf_spacing)
    x = sphere_points(np.stack(lc.mesh(), axis=-1))  # leaf shape + (n-1,)
    nl = len(lc.shape)
    extra = (slice(None), slice(None)) + (None,) * nl
    c = frame.center[extra]
    r = frame.radius[extra]
    basis = frame.basis[extra]
    p = c + r[..., None] * np.einsum("...j,...jd->...d", x[None, None], basis)
    f = euclidean_coords(p, model)
    chart = GridChart(S.chart.starts + lc.starts, S.chart.spacings + lc.spacings, S.chart.counts + lc.counts)

    s_full = np.broadcast_to(s[extra], p.shape)
    lam = minkowski_dot(s_full, model.w)
    normal = euclidean_coords(s_full - lam[..., None] * psi_embed(f, model), model)
    exact = {
        "lam": lam,
        "normal": normal,
        "radius": 1.0 / lam,
        "s": s,
        "leaf_radius": frame.radius,
        "pivots": frame.pivots,
        "pivot_min": frame.pivot_min,
        "steer": frame.steer,
    }
    meta = {"source": "envelope", "surface": S.meta, "leaf_counts": list(leaf_counts), "leaf_spacing": leaf_spacing}
    return HypersurfaceChart(chart, f, meta=meta, exact=exact)


def envelope_report(S, H, model=None, tol=DEFAULT, margin=2):
    """Residuals of the enveloping conditions <Psi f, s> = 0 and <Psi_* f_* X, s> = 0."""
    n = H.n
    model = model or LightConeModel.canonical(n + 1)
    s = H.exact["s"] if H.exact is not None else S.positions
    nl = n - 2
    s_full = s[(slice(None), slice(None)) + (None,) * nl]
    P = psi_embed(H.positions, model)
    on = np.abs(minkowski_dot(P, s_full))
    tangency = []
    for k in range(n):
        fk = d1(H.positions, k, H.chart.spacings[k])
        tangency.append(np.abs(minkowski_dot(psi_push(H.positions, fk, model), s_full)))
    tang = crop(crop(np.max(np.stack(tangency), axis=0), (0, 1), margin), H.leaf_axes, 1)
    return {
        "incidence_max": float(on.max()),
        "tangency_max": float(tang.max()),
        "threshold": tol.disc(H.chart.h),
        "ok": bool(on.max() <= tol.algebraic and tang.max() <= tol.disc(H.chart.h)),
    }


# -- congruence of a hypersurface -------------------------------------------


@dataclass
class SphereCongruence:
    """S = Psi_* N + lam Psi(f) sampled on an M-chart, plus its Euclidean spheres."""

    chart: GridChart
    S: np.ndarray
    lam: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    leaf_axes: tuple
    origin: str = "finite-difference"
    notes: list = field(default_factory=list)


def build_congruence(H, model=None, geom=None, use_exact=False, tol=DEFAULT):
    """Curvature-sphere congruence of the multiplicity-(n-2) principal curvature.

    With ``use_exact`` the closed-form normal and curvature recorded by the
    envelope construction are used; otherwise those of ``geom`` (level-1 grid).
    """
    model = model or LightConeModel.canonical(H.n + 1)
    if use_exact:
        if H.exact is None:
            raise GeometryError("hypersurface carries no closed-form normal", stage="congruence")
        f, N, lam, chart = H.positions, H.exact["normal"], H.exact["lam"], H.chart
        origin = "closed-form"
    else:
        if geom is None:
            raise GeometryError("finite-difference congruence needs the hypersurface geometry", stage="congruence")
        f, N, lam, chart = geom.f1, geom.N, geom.lam, geom.chart1
        origin = "finite-difference"
    bad = ~(np.abs(lam) > tol.margin_floor)
    if np.any(bad):
        raise GeometryError("principal curvature crosses zero; compose with an inversion first", index=first_bad_index(bad), stage="congruence")
    S = psi_push(f, N, model) + lam[..., None] * psi_embed(f, model)
    radii = 1.0 / lam
    centers = euclidean_coords(radii[..., None] * S, model)
    return SphereCongruence(chart, S, lam, centers, radii, H.leaf_axes, origin)


def congruence_report(SC, geom, model=None, tol=DEFAULT, margin=2):
    """Finite-difference checks of S_* against the shape operator.

    ``SC`` must live on the level-1 grid of ``geom`` (or on the full chart,
    in which case it is cropped).
    """
    model = model or LightConeModel.canonical(geom.n + 1)
    S = SC.S
    if S.shape[:-1] == geom.H.chart.shape:
        S = crop(S, geom.leaf, 1)
    n = geom.n
    f2 = geom.lvl2(geom.f1)
    A2 = geom.lvl2(geom.A)
    lam2 = geom.lvl2(geom.lam)
    B = A2 - lam2[..., None, None] * np.eye(n)
    fk2 = geom.lvl2(geom.fk)
    dlam = geom.dlam
    P2 = psi_embed(f2, model)
    Sk = np.stack([geom.deriv(S, k) for k in range(n)], axis=-2)  # (..., n, d)
    push_res = []
    for k in range(n):
        v = np.einsum("...j,...jd->...d", B[..., :, k], fk2)
        rhs = -psi_push(f2, v, model) + dlam[..., k, None] * P2
        push_res.append(np.linalg.norm(Sk[..., k, :] - rhs, axis=-1))
    push_res = np.stack(push_res, axis=-1)
    kernel = np.linalg.norm(Sk[..., 2:, :], axis=-1).max(axis=-1)
    gram_S = _lorentz_gram(Sk)
    gram_B = np.swapaxes(B, -1, -2) @ geom.G2 @ B
    metric_res = np.abs(gram_S - gram_B).max(axis=(-2, -1))
    c = lambda x: crop(x, (0, 1), margin)
    bar = tol.disc(geom.H.chart.h)
    rep = {
        "pushforward_max": float(c(push_res).max()),
        "kernel_max": float(c(kernel).max()),
        "induced_metric_max": float(c(metric_res).max()),
        "unit_max": float(np.abs(minkowski_dot(SC.S, SC.S) - 1.0).max()),
        "threshold": bar,
    }
    rep["ok"] = bool(max(rep["pushforward_max"], rep["kernel_max"], rep["induced_metric_max"]) <= bar)
    return rep


class QuotientMap:
    """Projection from an adapted M-chart to its (u, v) chart by forgetting leaf coordinates."""

    def __init__(self, chart, leaf_axes):
        self.chart = chart
        self.leaf_axes = tuple(leaf_axes)
        self.uv_chart = GridChart(chart.starts[:2], chart.spacings[:2], chart.counts[:2], strict=False)

    def reference(self):
        return tuple(self.chart.counts[a] // 2 for a in self.leaf_axes)

    def project(self, field, index=None):
        index = self.reference() if index is None else tuple(index)
        return field[(slice(None), slice(None)) + index]

    def lift(self, field, leaf_shape=None):
        """Copy a (u, v) field along every leaf."""
        leaf_shape = leaf_shape or tuple(self.chart.counts[a] for a in self.leaf_axes)
        field = np.asarray(field)
        expanded = field[(slice(None), slice(None)) + (None,) * len(leaf_shape)]
        return np.broadcast_to(expanded, field.shape[:2] + tuple(leaf_shape) + field.shape[2:])


def quotient_surface(SC, leaf_tol=1e-8):
    """The de Sitter surface s(u, v) = S(u, v, t_ref) of a two-parameter congruence."""
    Q = QuotientMap(SC.chart, SC.leaf_axes)
    ref = Q.project(SC.S)
    dev = np.linalg.norm(SC.S - Q.lift(ref), axis=-1)
    worst = float(dev.max())
    if worst > leaf_tol:
        raise GeometryError(
            f"congruence is not two-parameter: leaf dependence {worst:.3e} > {leaf_tol:.1e}",
            index=first_bad_index(dev == dev.max()),
            stage="quotient",
        )
    S = SurfaceChart(Q.uv_chart, np.array(ref), meta={"origin": SC.origin})
    S.leaf_dependence = worst
    return S


def projectability_check(values, geom, kind="form", margin=2, tol=DEFAULT):
    """Does a level-1 field on M descend to the leaf space?

    kind="form": values (..., n) is a one-form; reports |omega(T)| and
    |d omega(T, X)| over leaf directions T and X in {d_u, d_v}.
    kind="tensor": values (..., 2, 2) acts on the horizontal frame {X_u, X_v};
    in that frame nabla^h_T D - [D, C_T] reduces to d_T D.
    """
    values = np.asarray(values, float)
    n = geom.n
    bar = tol.disc(geom.H.chart.h)
    c = lambda x: crop(x, (0, 1), margin)
    if kind == "form":
        on_leaf = c(geom.lvl2(np.abs(values[..., 2:]).max(axis=-1)))
        curls = []
        for t in range(2, n):
            for x in (0, 1):
                curls.append(np.abs(geom.deriv(values[..., x], t) - geom.deriv(values[..., t], x)))
        curl = c(np.max(np.stack(curls), axis=0))
        rep = {"leaf_value_max": float(on_leaf.max()), "leaf_curl_max": float(curl.max())}
        rep["projectable"] = bool(max(rep.values()) <= bar)
    elif kind == "tensor":
        vari = [np.abs(geom.deriv(values, t)).max(axis=(-2, -1)) for t in range(2, n)]
        rep = {"leaf_variation_max": float(c(np.max(np.stack(vari), axis=0)).max())}
        rep["projectable"] = bool(rep["leaf_variation_max"] <= bar)
    else:
        raise GeometryError(f"unknown field kind {kind!r}")
    rep["threshold"] = bar
    return rep
