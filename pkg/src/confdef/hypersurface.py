"""Hypersurfaces f: M^n -> R^{n+1} on adapted grid charts.

Chart axes are (u, v, t_1, ..., t_{n-2}); the leaf coordinates t_k span the
eigendistribution of the multiplicity-(n-2) principal curvature.

Derivatives along u and v use one-sided stencils at the chart edge and are
fourth order by default, while derivatives along leaf axes are second order
and only taken where central stencils exist.
Quantities built from first or second jets of f therefore live on the
"level 1" grid (leaf axes cropped by one sample at each end) and
derivatives of those live on "level 2" (cropped by two).  Residual suites
evaluate on level 2 with an extra (u, v) margin.
"""

from functools import cached_property

import numpy as np

from .config import DEFAULT
from .errors import GeometryError, first_bad_index
from .grid import crop, d1, d11


class HypersurfaceChart:
    """Grid samples of f: M^n -> R^{n+1}.

    ``exact`` optionally carries closed-form companions of the samples
    (unit normal, curvature, sphere centres) produced by the envelope
    construction; finite-difference code never reads it.
    """

    def __init__(self, chart, positions, meta=None, exact=None):
        positions = np.asarray(positions, dtype=float)
        n = chart.ndim
        if n < 3:
            raise GeometryError("hypersurface charts need n >= 3 axes (u, v and at least one leaf axis)")
        if positions.shape != chart.shape + (n + 1,):
            raise GeometryError(f"positions shape {positions.shape} does not match chart {chart.shape} in R^{n + 1}")
        self.chart = chart
        self.positions = positions
        self.meta = dict(meta or {})
        self.exact = exact

    @property
    def n(self):
        return self.chart.ndim

    @property
    def leaf_axes(self):
        return tuple(range(2, self.n))


def _local_d11(f, leaf, a, b, h, uv_order=2):
    """d_a f (b is None) or d_a d_b f on the level-1 grid.

    Leaf axes not being differentiated are cropped before differencing, which
    keeps the work proportional to the level-1 grid.
    """
    used = {a} if b is None else {a, b}
    g = crop(f, tuple(t for t in leaf if t not in used), 1)
    order = lambda k: uv_order if k < 2 else 2
    out = d1(g, a, h[a], order(a)) if b is None else d11(g, a, b, h[a], h[b], order(a), order(b))
    return crop(out, tuple(t for t in leaf if t in used), 1)


def unit_normal(frame):
    """Unit normal to the rows of ``frame`` (..., n, n+1) by cofactor expansion."""
    n = frame.shape[-2]
    comps = []
    for i in range(n + 1):
        minor = np.delete(frame, i, axis=-1)
        comps.append((-1) ** i * np.linalg.det(minor))
    N = np.stack(comps, axis=-1)
    return N / np.linalg.norm(N, axis=-1, keepdims=True)


def _sym_eigs(metric, form):
    """Eigenvalues of metric^{-1} form for a positive metric, ascending."""
    L = np.linalg.cholesky(metric)
    Linv = np.linalg.inv(L)
    M = Linv @ form @ np.swapaxes(Linv, -1, -2)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(M)


class HypersurfaceGeometry:
    """Metric, normal, shape operator and connection of a hypersurface chart."""

    def __init__(self, H, tol=DEFAULT, normal_sign="auto", uv_order=4):
        self.H = H
        self.uv_order = uv_order
        self.tol = tol
        n = H.n
        self.n = n
        leaf = H.leaf_axes
        self.leaf = leaf
        h = H.chart.spacings
        f = H.positions
        self.chart1 = H.chart.crop(leaf, 1)
        self.chart2 = H.chart.crop(leaf, 2)

        fk = np.stack([_local_d11(f, leaf, k, None, h, uv_order) for k in range(n)], axis=-2)
        self.f1 = crop(f, leaf, 1)
        self.fk = fk
        G = fk @ np.swapaxes(fk, -1, -2)
        self.G = G
        ev = np.linalg.eigvalsh(G)
        cond = ev[..., -1] / np.where(ev[..., 0] > 0, ev[..., 0], np.nan)
        bad = ~(cond < tol.cond_max)
        if np.any(bad):
            raise GeometryError("immersion is not regular: metric ill-conditioned", index=first_bad_index(bad), stage="shape_operator")
        N = unit_normal(fk)
        if normal_sign != "auto":
            N = normal_sign * N
        self.N = N

        fk2 = crop(fk, leaf, 1)
        II = np.empty(G.shape)
        lowered = np.empty(self.chart2.shape + (n, n, n))  # [l, k, j] = <f_kj, f_l>
        for a in range(n):
            for b in range(a, n):
                fab = _local_d11(f, leaf, a, b, h, uv_order)
                II[..., a, b] = II[..., b, a] = np.einsum("...i,...i->...", fab, N)
                c = np.einsum("...li,...i->...l", fk2, crop(fab, leaf, 1))
                lowered[..., :, a, b] = c
                lowered[..., :, b, a] = c
        self.II = II
        self.Ginv = np.linalg.inv(G)
        self.A = self.Ginv @ II

        self.G2 = crop(G, leaf, 1)
        self.Ginv2 = crop(self.Ginv, leaf, 1)
        # Gamma[..., m, k, j] = Gamma^m_kj
        self.Gamma = np.einsum("...ml,...lkj->...mkj", self.Ginv2, lowered)

        self._principal()
        if normal_sign == "auto" and np.median(self.lam) < 0:
            # orient N so that the distinguished curvature is positive
            self.N, self.II, self.A = -self.N, -self.II, -self.A
            self.lam = -self.lam
            self.eigs = -self.eigs[..., ::-1]
            self.other_eigs = -self.other_eigs[..., ::-1]
        self._horizontal()

    # -- principal curvature of multiplicity n-2 ---------------------------------
    def _principal(self):
        n = self.n
        T = list(self.leaf)
        GTT = self.G[..., T, :][..., :, T]
        IITT = self.II[..., T, :][..., :, T]
        leaf_eigs = _sym_eigs(GTT, IITT)
        self.lam = leaf_eigs.mean(axis=-1)
        self.eigs = _sym_eigs(self.G, self.II)
        dist = np.abs(self.eigs - self.lam[..., None])
        order = np.argsort(dist, axis=-1)
        cluster = np.take_along_axis(dist, order[..., : n - 2], axis=-1)
        others = np.take_along_axis(self.eigs, order[..., n - 2 :], axis=-1)
        self.spread = cluster.max(axis=-1)
        self.gap = np.abs(others - self.lam[..., None]).min(axis=-1)
        self.other_eigs = np.sort(others, axis=-1)
        self.delta_defect = np.linalg.norm(
            np.einsum("...ij,...jt->...it", self.A, np.eye(n)[:, T]) - self.lam[..., None, None] * np.eye(n)[:, T],
            axis=(-2, -1),
        )

    def multiplicity_mask(self, margin=2):
        """True where lam has numerical multiplicity n-2 and is isolated from the rest.

        The cluster may spread by the relative gap allowance or by the
        discretisation bar, whichever is larger; the gap must clear that bar.
        """
        spread = crop(self.spread, (0, 1), margin)
        gap = crop(self.gap, (0, 1), margin)
        bar = self.tol.disc(self.H.chart.h)
        return (spread <= np.maximum(self.tol.gap_rel * gap, bar)) & (gap > bar)

    def multiplicity_ok(self, margin=2):
        return bool(np.all(self.multiplicity_mask(margin)))

    # -- horizontal lifts of d_u, d_v ----------------------------------------------
    def _horizontal(self):
        n = self.n
        T = list(self.leaf)
        GTT = self.G[..., T, :][..., :, T]
        GTa = self.G[..., T, :][..., :, :2]
        coef = np.linalg.solve(GTT, GTa)  # (..., n-2, 2)
        X = np.zeros(self.G.shape[:-2] + (n, 2))
        X[..., 0, 0] = 1.0
        X[..., 1, 1] = 1.0
        X[..., 2:, :] = -coef
        self.X = X
        self.hmetric = np.swapaxes(X, -1, -2) @ self.G @ X

    def _order(self, k):
        return self.uv_order if k < 2 else 2

    @property
    def X2(self):
        return crop(self.X, self.leaf, 1)

    def lvl2(self, field):
        """Crop a level-1 field to level 2."""
        return crop(field, self.leaf, 1)

    def deriv(self, field1, k):
        """Derivative along axis k of a level-1 field, returned on level 2."""
        return crop(d1(field1, k, self.H.chart.spacings[k], self._order(k)), self.leaf, 1)

    def deriv_uv(self, field1, k):
        """Derivative along u or v of a level-1 field, kept on level 1."""
        if k not in (0, 1):
            raise GeometryError("deriv_uv only differentiates along u or v")
        return d1(field1, k, self.H.chart.spacings[k], self.uv_order)

    def gradient(self, scalar1):
        """Differential (..., n) of a level-1 scalar, on level 2."""
        return np.stack([self.deriv(scalar1, k) for k in range(self.n)], axis=-1)

    def hessian(self, scalar1):
        """Covariant Hessian (..., n, n) of a level-1 scalar, on level 2."""
        h = self.H.chart.spacings
        n = self.n
        raw = np.empty(self.chart2.shape + (n, n))
        for a in range(n):
            for b in range(a, n):
                if a == b and a in self.leaf:
                    # the end samples are cropped, so the central stencil suffices
                    f = np.moveaxis(scalar1, a, 0)
                    val = np.moveaxis((f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h[a] * h[a]), 0, a)
                    val = crop(val, [t for t in self.leaf if t != a], 1)
                else:
                    val = crop(d11(scalar1, a, b, h[a], h[b], self._order(a), self._order(b)), self.leaf, 1)
                raw[..., a, b] = raw[..., b, a] = val
        return raw - np.einsum("...mkl,...m->...kl", self.Gamma, self.gradient(scalar1))

    def covariant(self, tensor1):
        """nabla of a level-1 (1,1)-tensor: out[..., k, m, l] = (nabla_k T)^m_l on level 2."""
        partial = np.stack([self.deriv(tensor1, k) for k in range(self.n)], axis=-3)
        t2 = self.lvl2(tensor1)
        return (
            partial
            + np.einsum("...mkp,...pl->...kml", self.Gamma, t2)
            - np.einsum("...pkl,...mp->...kml", self.Gamma, t2)
        )

    @cached_property
    def dlam(self):
        return self.gradient(self.lam)

    def inner(self, a, b, level=2):
        G = self.G2 if level == 2 else self.G
        return np.einsum("...i,...ij,...j->...", a, G, b)


def shape_operator(H, tol=DEFAULT, normal_sign="auto", require_multiplicity=True, margin=2, uv_order=4):
    """Shape operator, principal curvatures and the multiplicity-(n-2) eigenvalue.

    Raises when no eigenvalue of multiplicity n-2 separated from the other two
    is found on the interior.
    """
    geom = HypersurfaceGeometry(H, tol, normal_sign, uv_order)
    if require_multiplicity and not geom.multiplicity_ok(margin):
        bad = ~geom.multiplicity_mask(margin)
        raise GeometryError(
            "not in the class: no principal curvature of multiplicity n-2",
            index=first_bad_index(bad),
            stage="shape_operator",
        )
    return geom


def splitting_tensor(geom, t_index):
    """C_T X = -(nabla_X T)^h for T = d/dt_{t_index}, as 2x2 fields on level 2.

    Matrices act on coefficients in the horizontal frame {X_u, X_v}.
    """
    T = 2 + t_index
    X2 = geom.X2
    gam = geom.Gamma[..., :2, :, T]  # [..., c, i] = Gamma^c_{i T}
    return -np.einsum("...ci,...ia->...ca", gam, X2)


def _orthonormal_rep(C, hmetric):
    L = np.linalg.cholesky(hmetric)
    return np.swapaxes(L, -1, -2) @ C @ np.linalg.inv(np.swapaxes(L, -1, -2))


def splitting_report(geom, J=None, margin=2, tol=DEFAULT):
    """Residuals of C_T against span{I} and span{I, J} for every leaf direction."""
    hm2 = geom.lvl2(geom.hmetric)
    out = {"span_I": [], "span_IJ": [], "norm": []}
    for t in range(geom.n - 2):
        C = _orthonormal_rep(splitting_tensor(geom, t), hm2)
        trace = 0.5 * np.trace(C, axis1=-2, axis2=-1)
        aniso = C - trace[..., None, None] * np.eye(2)
        out["span_I"].append(crop(np.linalg.norm(aniso, axis=(-2, -1)), (0, 1), margin))
        out["norm"].append(crop(np.linalg.norm(C, axis=(-2, -1)), (0, 1), margin))
        if J is not None:
            Jo = _orthonormal_rep(np.broadcast_to(J, C.shape), hm2)
            basis = np.stack([np.broadcast_to(np.eye(2), C.shape), Jo], axis=-3).reshape(C.shape[:-2] + (2, 4))
            coef, *_ = _lstsq_batched(basis, C.reshape(C.shape[:-2] + (4,)))
            resid = C.reshape(C.shape[:-2] + (4,)) - np.einsum("...ka,...k->...a", basis, coef)
            out["span_IJ"].append(crop(np.linalg.norm(resid, axis=-1), (0, 1), margin))
    span_I = np.max(np.stack(out["span_I"]), axis=0)
    report = {
        "span_I_residual_max": float(span_I.max()),
        "span_I_residual_median": float(np.median(span_I)),
        "span_I_fraction_above": float(np.mean(span_I > tol.disc(geom.H.chart.h))),
        "norm_max": float(np.max(np.stack(out["norm"]))),
    }
    report["surface_like"] = bool(report["span_I_residual_max"] <= tol.disc(geom.H.chart.h))
    if J is not None:
        report["span_IJ_residual_max"] = float(np.max(np.stack(out["span_IJ"])))
    return report


def check_not_surface_like(geom, tol=DEFAULT, margin=2):
    """Raise when every splitting tensor is a multiple of the identity."""
    rep = splitting_report(geom, margin=margin, tol=tol)
    if rep["surface_like"]:
        raise GeometryError(
            f"conformally surface-like: C_T lies in span{{I}} up to {rep['span_I_residual_max']:.3e}",
            stage="splitting_tensor",
        )
    return rep


def _lstsq_batched(basis, target):
    # basis: (..., 2, 4) rows are flattened I and J; solve min |coef @ basis - target|
    BBt = basis @ np.swapaxes(basis, -1, -2)
    rhs = np.einsum("...ka,...a->...k", basis, target)
    return (np.linalg.solve(BBt, rhs[..., None])[..., 0],)


def cylinder_over_surface(chart, surface="paraboloid"):
    """f(u, v, t) = (sigma(u, v), t): a conformally surface-like test input."""
    grids = chart.mesh()
    u, v = grids[0], grids[1]
    ts = grids[2:]
    if surface == "paraboloid":
        z = 0.6 * u * u + 0.25 * v * v + 0.3 * u * v * v
    else:
        raise GeometryError(f"unknown cylinder base {surface!r}")
    pos = np.stack([u, v, z] + list(ts), axis=-1)
    return HypersurfaceChart(chart, pos, {"name": f"cylinder over {surface}"})


def invert(H, center, radius=1.0):
    """Compose a hypersurface chart with the inversion in a sphere (a Mobius map)."""
    c = np.asarray(center, float)
    d = H.positions - c
    r2 = np.einsum("...i,...i->...", d, d)
    return HypersurfaceChart(H.chart, c + radius * radius * d / r2[..., None], dict(H.meta, inverted=list(c)))
