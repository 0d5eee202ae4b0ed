"""Deformation triples (D_1, D_2, psi): built on the surface, checked on M.

On the surface, D_1 and D_2 are 2x2 fields acting on the coordinate frame
{d_u, d_v} and psi has components (psi_u, psi_v).  On M the same data act
on the horizontal frame {X_u, X_v}, vanish on the leaves, and are stored as
n x n coordinate matrices.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import GeometryError, first_bad_index
from .grid import crop, d1
from .surface import J_ELLIPTIC, J_HYPERBOLIC, interior

SQRT2 = np.sqrt(2.0)


@dataclass
class BarTriple:
    kind: str
    theta1: np.ndarray
    theta2: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    psi: np.ndarray
    consistency: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def J(self):
        return J_HYPERBOLIC if self.kind == "hyperbolic" else J_ELLIPTIC

    def as_array(self):
        """Flattened (D_1, D_2, psi) for distance comparisons."""
        return np.concatenate([self.D1.reshape(-1), self.D2.reshape(-1), self.psi.reshape(-1)])


def triple_distance(a, b, margin=2):
    """Max-norm distance between two triples on the interior, minimised over the
    sign and permutation ambiguity (D_1, D_2, psi) ~ (D_2, D_1, -psi) ~ (-D_i, ...)."""
    def inner(x):
        return crop(x, (0, 1), margin)

    best = np.inf
    for swap in (False, True):
        D1, D2, psi = (b.D2, b.D1, -b.psi) if swap else (b.D1, b.D2, b.psi)
        for s1 in (1, -1):
            for s2 in (1, -1):
                sp = s1 * s2
                dist = max(
                    np.abs(inner(a.D1 - s1 * D1)).max(),
                    np.abs(inner(a.D2 - s2 * D2)).max(),
                    np.abs(inner(a.psi - sp * psi)).max(),
                )
                best = min(best, float(dist))
    return best


def _diag_field(a, b):
    out = np.zeros(np.shape(a) + (2, 2))
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def reconstruct_bar_triple(cand, S, tol=DEFAULT):
    """(D_1, D_2, psi) on the surface from a member of the deformation set."""
    if cand.kind == "hyperbolic":
        return _reconstruct_hyperbolic(cand, S, tol)
    if cand.kind == "elliptic":
        return _reconstruct_elliptic(cand, S, tol)
    raise GeometryError(f"unknown candidate kind {cand.kind!r}")


def hyperbolic_roots(alpha, beta, tol=DEFAULT):
    """tau_1 < tau_2, the roots of tau^2 - alpha tau + alpha/beta = 0."""
    bad = ~((alpha > 0) & (beta > 0))
    if np.any(bad):
        raise GeometryError("alpha or beta not positive", index=first_bad_index(bad), stage="triple")
    gap = alpha * beta - 4.0
    bad = ~(gap > tol.margin_floor)
    if np.any(bad):
        raise GeometryError("degenerate candidate: alpha*beta - 4 <= 0", index=first_bad_index(bad), stage="triple")
    disc = np.sqrt((alpha / beta) * gap)
    return 0.5 * (alpha - disc), 0.5 * (alpha + disc)


def _reconstruct_hyperbolic(cand, S, tol):
    if cand.phi_U is None or cand.phi_V is None:
        raise GeometryError("candidate has not been transported", stage="triple")
    hu, hv = S.chart.spacings
    alpha = 2.0 + 1.0 / cand.phi_U
    beta = 2.0 + 1.0 / cand.phi_V
    tau1, tau2 = hyperbolic_roots(alpha, beta, tol)
    theta1, theta2 = np.sqrt(tau1), np.sqrt(tau2)
    g1, g2 = S.gamma1, S.gamma2
    tt = theta1 * theta2
    o = S.fd_order
    psi_v = (d1(tau1, 1, hv, o) + 2.0 * (tau1 - 1.0) * g1) / (2.0 * tt)
    psi_u = tt * (d1(1.0 / tau1, 0, hu, o) + 2.0 * (1.0 / tau1 - 1.0) * g2) / 2.0
    # the i = 2 equations are redundant; they measure consistency
    res_u = d1(1.0 / tau2, 0, hu, o) + 2.0 * (1.0 / tau2 - 1.0) * g2 + 2.0 * psi_u / tt
    res_v = d1(tau2, 1, hv, o) + 2.0 * (tau2 - 1.0) * g1 + 2.0 * psi_v * tt
    D1 = _diag_field(theta1, 1.0 / theta1) / SQRT2
    D2 = _diag_field(theta2, 1.0 / theta2) / SQRT2
    consistency = {
        "second_root_u_max": float(np.abs(interior(res_u)).max()),
        "second_root_v_max": float(np.abs(interior(res_v)).max()),
        "vieta_sum_max": float(np.abs(tau1 + tau2 - alpha).max()),
        "vieta_product_max": float(np.abs(tau1 * tau2 - alpha / beta).max()),
    }
    meta = {"order": "tau1 < tau2", "branch": "positive square roots", "candidate": cand.describe()}
    return BarTriple("hyperbolic", theta1, theta2, tau1, tau2, alpha, beta, D1, D2, np.stack([psi_u, psi_v], -1), consistency, meta)


def elliptic_roots(alpha):
    """tau_j = (alpha/2)(1 - (-1)^j i sqrt(4 - |alpha|^2)/|alpha|), j = 1, 2."""
    a = np.abs(alpha)
    bad = ~((a > 0) & (a < 2))
    if np.any(bad):
        raise GeometryError("elliptic data needs 0 < |alpha| < 2", index=first_bad_index(bad), stage="triple")
    r = np.sqrt(4.0 - a * a) / a
    return 0.5 * alpha * (1.0 + 1j * r), 0.5 * alpha * (1.0 - 1j * r)


def _continuous_sqrt(z, anchor=(0, 0)):
    """Square root of a nowhere-zero complex field, continuous from ``anchor``."""
    root = np.sqrt(z)  # principal branch
    sign = np.ones(z.shape)
    # walk u then v from the anchor; flip where a sample jumps to the other sheet
    ref = root.copy()
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            if (i, j) == anchor:
                continue
            ni, nj = (i, j - 1) if j > 0 else (i - 1, j)
            prev = ref[ni, nj]
            if abs(root[i, j] - prev) > abs(root[i, j] + prev):
                ref[i, j] = -root[i, j]
                sign[i, j] = -1
            else:
                ref[i, j] = root[i, j]
    return ref


def _reconstruct_elliptic(cand, S, tol):
    if cand.phi_zeta is None:
        raise GeometryError("candidate has not been transported", stage="triple")
    hu, hv = S.chart.spacings
    alpha = 2.0 + 1.0 / cand.phi_zeta
    tau1, tau2 = elliptic_roots(alpha)
    theta1, theta2 = _continuous_sqrt(tau1), _continuous_sqrt(tau2)
    gam = S.complex_christoffel()
    o = S.fd_order
    dzbar = lambda f: 0.5 * (d1(f, 0, hu, o) + 1j * d1(f, 1, hv, o))
    tt = theta1 * theta2
    psi_zbar = (dzbar(tau1) + 2.0 * (tau1 - 1.0) * gam) / (2.0 * tt)
    psi = np.stack([2.0 * psi_zbar.real, 2.0 * psi_zbar.imag], -1)

    def rep(theta):
        eye = np.broadcast_to(np.eye(2), theta.shape + (2, 2))
        return (theta.real[..., None, None] * eye + theta.imag[..., None, None] * J_ELLIPTIC) / SQRT2

    consistency = {
        "unit_modulus_max": float(max(np.abs(np.abs(tau1) - 1).max(), np.abs(np.abs(tau2) - 1).max())),
        "vieta_sum_max": float(np.abs(tau1 + tau2 - alpha).max()),
        "vieta_product_max": float(np.abs(tau1 * tau2 - alpha / np.conj(alpha)).max()),
    }
    meta = {"order": "j = 1, 2 as in the closed form", "branch": "principal at the grid origin, continued", "candidate": cand.describe()}
    return BarTriple("elliptic", theta1, theta2, tau1, tau2, alpha, np.conj(alpha), rep(theta1), rep(theta2), psi, consistency, meta)


def bar_triple_from_arrays(D1, D2, psi, kind="hyperbolic"):
    """Wrap hand-built fields (fault injection, negative controls)."""
    z = np.zeros(np.shape(D1)[:-2])
    return BarTriple(kind, z, z, z, z, z, z, np.asarray(D1, float), np.asarray(D2, float), np.asarray(psi, float))


# -- checks on the surface ------------------------------------------------------


def _orthonormal(mats, metric):
    """Matrix of endomorphisms in a metric-orthonormal frame."""
    L = np.linalg.cholesky(metric)
    Lt = np.swapaxes(L, -1, -2)
    return Lt @ mats @ np.linalg.inv(Lt)


def _argmax(field, margin):
    loc = np.unravel_index(int(np.argmax(field)), field.shape)
    return [int(i) + (margin if k < 2 else 0) for k, i in enumerate(loc)]


def genuineness_margins(D1, D2, metric):
    """Pointwise margins: min(|D2^2 - D1^2|, |D2^2 + D1^2|) and the smaller
    singular value of D1^2 + D2^2 - I, both in an orthonormal frame."""
    A1 = _orthonormal(D1, metric)
    A2 = _orthonormal(D2, metric)
    S1, S2 = A1 @ A1, A2 @ A2
    m8 = np.minimum(np.linalg.norm(S2 - S1, axis=(-2, -1)), np.linalg.norm(S2 + S1, axis=(-2, -1)))
    m9 = np.linalg.svd(S1 + S2 - np.eye(2), compute_uv=False)[..., -1]
    return m8, m9


def _cov_endo_2d(D, S):
    """nabla D on the surface: out[..., k, m, l] = (nabla_k D)^m_l."""
    hu, hv = S.chart.spacings
    gam = S.christoffel
    partial = np.stack([d1(D, 0, hu, S.fd_order), d1(D, 1, hv, S.fd_order)], axis=-3)
    return partial + np.einsum("...mkp,...pl->...kml", gam, D) - np.einsum("...pkl,...mp->...kml", gam, D)


def verify_bar_conditions(T, S, tol=DEFAULT, margin=2):
    """Residuals of the five conditions a triple on the surface must satisfy."""
    g = S.metric
    hu, hv = S.chart.spacings
    inn = lambda x: interior(x, margin)
    bar = tol.disc(S.h)
    rep = {}

    det_res = np.maximum(np.abs(np.linalg.det(T.D1) - 0.5), np.abs(np.linalg.det(T.D2) - 0.5))
    rep["a_det"] = {"max": float(det_res.max()), "ok": bool(det_res.max() <= tol.algebraic)}

    psi_u, psi_v = T.psi[..., 0], T.psi[..., 1]
    norm_g = lambda vec: np.sqrt(np.abs(np.einsum("...i,...ij,...j->...", vec, g, vec)))
    b_worst = np.zeros(S.chart.shape)
    for i, (Di, Dj, sign) in enumerate(((T.D1, T.D2, 1.0), (T.D2, T.D1, -1.0)), start=1):
        nab = _cov_endo_2d(Di, S)
        lhs = nab[..., 0, :, 1] - nab[..., 1, :, 0]
        rhs = sign * (psi_u[..., None] * Dj[..., :, 1] - psi_v[..., None] * Dj[..., :, 0])
        r = norm_g(lhs - rhs)
        rep[f"b_codazzi_{i}"] = {"max": float(inn(r).max()), "argmax": _argmax(inn(r), margin)}
        b_worst = np.maximum(b_worst, r)
    rep["b_codazzi"] = {"max": float(inn(b_worst).max()), "ok": bool(inn(b_worst).max() <= bar)}

    dpsi = d1(psi_v, 0, hu, S.fd_order) - d1(psi_u, 1, hv, S.fd_order)
    F = g[..., 0, 1]
    ge = lambda x, y: np.einsum("...i,...ij,...j->...", x, g, y)
    e_u, e_v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    rhs = ge(T.D2 @ e_u, T.D1 @ e_v) - ge(T.D1 @ e_u, T.D2 @ e_v)
    c_res = np.abs(dpsi - rhs)
    rep["c_dpsi"] = {"max": float(inn(c_res).max()), "argmax": _argmax(inn(c_res), margin), "ok": bool(inn(c_res).max() <= bar)}
    del F

    m8, m9 = genuineness_margins(T.D1, T.D2, g)
    rep["d_not_pm"] = {"min": float(inn(m8).min()), "ok": bool(inn(m8).min() > tol.margin_floor)}
    rep["e_rank"] = {"min": float(inn(m9).min()), "ok": bool(inn(m9).min() > tol.margin_floor)}
    rep["threshold"] = bar
    rep["ok"] = all(v["ok"] for k, v in rep.items() if isinstance(v, dict) and "ok" in v)
    return rep


# -- lift to M --------------------------------------------------------------------


@dataclass
class LiftedTriple:
    """Triple on M, stored on the level-1 grid of a hypersurface geometry."""

    Dbar1: np.ndarray
    Dbar2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    psi: np.ndarray
    J: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    kind: str = "hyperbolic"


def lift_field(values, geom):
    """Copy a (u, v) field along every leaf of the level-1 grid."""
    nl = len(geom.leaf)
    values = np.asarray(values)
    shape = geom.chart1.shape
    expanded = values[(slice(None), slice(None)) + (None,) * nl]
    if values.shape[:2] != shape[:2]:
        raise GeometryError(f"surface grid {values.shape[:2]} does not match the M-chart {shape[:2]}")
    return np.broadcast_to(expanded, shape + values.shape[2:])


def horizontal_endomorphism(Dbar, geom):
    """n x n coordinate matrix of the endomorphism acting by Dbar on {X_u, X_v} and by 0 on the leaves."""
    X = geom.X
    n = geom.n
    out = np.zeros(geom.chart1.shape + (n, n))
    out[..., :, :2] = X @ Dbar
    return out


def lift_to_M(T, geom):
    """Horizontal lifts of (D_1, D_2, psi) and the one-forms omega_i."""
    n = geom.n
    Db1 = np.array(lift_field(T.D1, geom))
    Db2 = np.array(lift_field(T.D2, geom))
    psi = np.zeros(geom.chart1.shape + (n,))
    psi[..., :2] = lift_field(T.psi, geom)
    D1 = horizontal_endomorphism(Db1, geom)
    D2 = horizontal_endomorphism(Db2, geom)
    dlam = geom.dlam
    lam2 = geom.lvl2(geom.lam)
    omega1 = -np.einsum("...k,...kl->...l", dlam, geom.lvl2(D1)) / lam2[..., None]
    omega2 = -np.einsum("...k,...kl->...l", dlam, geom.lvl2(D2)) / lam2[..., None]
    return LiftedTriple(Db1, Db2, D1, D2, psi, T.J, omega1, omega2, T.kind)


def perturb_psi(L, geom, field_fn):
    """Copy of a lifted triple with psi + field_fn(u, v) on its (u, v) components."""
    U = geom.chart1.mesh()
    extra = field_fn(U[0], U[1])
    psi = L.psi.copy()
    psi[..., :2] += extra
    return LiftedTriple(L.Dbar1, L.Dbar2, L.D1, L.D2, psi, L.J, L.omega1, L.omega2, L.kind)


def _wedge(X, Y, W, G):
    """(X ^ Y) W = <Y, W> X - <X, W> Y."""
    ip = lambda a, b: np.einsum("...i,...ij,...j->...", a, G, b)
    return ip(Y, W)[..., None] * X - ip(X, W)[..., None] * Y


def verify_conditions_i_ix(L, geom, tol=DEFAULT, margin=4, keep_grids=False):
    """Residuals of the nine conditions on M, evaluated with X = X_u, Y = X_v.

    ``keep_grids`` adds the uncropped residual fields of the differential
    items under ``"grids"``.
    """
    n = geom.n
    lv2 = geom.lvl2
    G = geom.G2
    Ginv = geom.Ginv2
    A = lv2(geom.A)
    lam = lv2(geom.lam)
    eye = np.eye(n)
    B = A - lam[..., None, None] * eye
    X2 = geom.X2
    Xu, Xv = X2[..., :, 0], X2[..., :, 1]
    D = (lv2(L.D1), lv2(L.D2))
    psi = lv2(L.psi)
    dlam = geom.dlam
    grad = np.einsum("...ij,...j->...i", Ginv, dlam)
    hess = geom.hessian(geom.lam)
    ip = lambda a, b: np.einsum("...i,...ij,...j->...", a, G, b)
    app = lambda M, v: np.einsum("...ij,...j->...i", M, v)
    vnorm = lambda v: np.sqrt(np.abs(ip(v, v)))
    inn = lambda x: crop(x, (0, 1), margin)
    bar = tol.disc(geom.H.chart.h)
    psiX, psiY = np.einsum("...i,...i->...", psi, Xu), np.einsum("...i,...i->...", psi, Xv)

    rep = {}
    rep["i_leaf_psi"] = {"max": float(np.abs(L.psi[..., 2:]).max()) if n > 2 else 0.0}
    rep["i_leaf_psi"]["ok"] = rep["i_leaf_psi"]["max"] == 0.0

    det_res = np.maximum(np.abs(np.linalg.det(L.Dbar1) - 0.5), np.abs(np.linalg.det(L.Dbar2) - 0.5))
    rep["ii_det"] = {"max": float(det_res.max()), "ok": bool(det_res.max() <= tol.algebraic)}

    # (iii): leaf derivative of the frame coefficients and commutation with C_T
    from .hypersurface import splitting_tensor

    leaf_var = max(float(np.abs(geom.deriv(Db, t)).max()) for Db in (L.Dbar1, L.Dbar2) for t in geom.leaf)
    r3 = np.zeros(geom.chart2.shape)
    for t in range(n - 2):
        C = splitting_tensor(geom, t)
        for Db in (lv2(L.Dbar1), lv2(L.Dbar2)):
            r3 = np.maximum(r3, np.linalg.norm(Db @ C - C @ Db, axis=(-2, -1)))
    rep["iii_leaf_parallel"] = {"max": leaf_var, "ok": leaf_var <= tol.algebraic}
    rep["iii_commutes"] = {"max": float(inn(r3).max()), "argmax": _argmax(inn(r3), margin), "ok": bool(inn(r3).max() <= bar)}

    iv_worst, v_worst, vp_worst = (np.zeros(geom.chart2.shape) for _ in range(3))
    # horizontal projection of grad lambda, for the projected form of (v)
    hm = np.swapaxes(X2, -1, -2) @ G @ X2
    coef = np.linalg.solve(hm, np.swapaxes(X2, -1, -2) @ np.einsum("...ij,...j->...i", G, grad)[..., None])[..., 0]
    grad_h = np.einsum("...ia,...a->...i", X2, coef)
    for i in (0, 1):
        Di, Dj = D[i], D[1 - i]
        sign = 1.0 if i == 0 else -1.0
        Bi = B @ Di
        nabB = geom.covariant(_level1_product(geom, L.D1 if i == 0 else L.D2))
        covX = lambda nab, V, W: np.einsum("...k,...kml,...l->...m", V, nab, W)
        lhs = covX(nabB, Xu, Xv) - covX(nabB, Xv, Xu)
        DiT_grad = app(np.swapaxes(Di, -1, -2) @ G, grad)
        DiT_grad = np.einsum("...ij,...j->...i", Ginv, DiT_grad)
        rhs = _wedge(Xu, Xv, DiT_grad, G) + sign * app(B, psiX[..., None] * app(Dj, Xv) - psiY[..., None] * app(Dj, Xu))
        r4 = vnorm(lhs - rhs)
        rep[f"iv_codazzi_{i + 1}"] = {"max": float(inn(r4).max()), "argmax": _argmax(inn(r4), margin)}
        iv_worst = np.maximum(iv_worst, r4)

        nabD = geom.covariant(L.D1 if i == 0 else L.D2)
        term = covX(nabD, Xv, Xu) - covX(nabD, Xu, Xv)
        hess_form = lambda V, W: np.einsum("...i,...ij,...j->...", V, hess, W)
        rest = (
            hess_form(app(Di, Xu), Xv)
            - hess_form(Xu, app(Di, Xv))
            + sign * psiX * ip(app(Dj, Xv), grad)
            - sign * psiY * ip(app(Dj, Xu), grad)
        )
        rhs5 = lam * (ip(app(A, Xu), app(Bi, Xv)) - ip(app(Bi, Xu), app(A, Xv)))
        r5 = np.abs(ip(term, grad) + rest - rhs5)
        r5p = np.abs(ip(term, grad_h) + rest - rhs5)
        rep[f"v_ricci_{i + 1}"] = {"max": float(inn(r5).max()), "projected_max": float(inn(r5p).max()), "argmax": _argmax(inn(r5), margin)}
        v_worst = np.maximum(v_worst, r5)
        vp_worst = np.maximum(vp_worst, r5p)
    rep["iv_codazzi"] = {"max": float(inn(iv_worst).max()), "ok": bool(inn(iv_worst).max() <= bar)}
    rep["v_ricci"] = {
        "max": float(inn(v_worst).max()),
        "projected_max": float(inn(vp_worst).max()),
        "ok": bool(inn(v_worst).max() <= bar),
    }

    # (vi) and (vii)
    curls = [np.abs(geom.deriv(L.psi[..., a], t) - geom.deriv(L.psi[..., t], a)) for t in geom.leaf for a in range(n)]
    vi = float(np.max([c.max() for c in curls])) if curls else 0.0
    rep["vi_dpsi_leaf"] = {"max": vi, "ok": vi <= tol.algebraic}

    dpsi = np.zeros(geom.chart2.shape + (n, n))
    for a in range(n):
        for b in range(n):
            if a != b:
                dpsi[..., a, b] = geom.deriv(L.psi[..., b], a)
    dpsi = dpsi - np.swapaxes(dpsi, -1, -2)
    dpsi_XY = np.einsum("...a,...ab,...b->...", Xu, dpsi, Xv)
    B1, B2 = B @ D[0], B @ D[1]
    comm = B1 @ B2 - B2 @ B1
    r7 = np.abs(dpsi_XY - ip(app(comm, Xu), Xv))
    rep["vii_dpsi"] = {"max": float(inn(r7).max()), "argmax": _argmax(inn(r7), margin), "ok": bool(inn(r7).max() <= bar)}

    m8, m9 = genuineness_margins(L.Dbar1, L.Dbar2, geom.hmetric)
    m8, m9 = crop(m8, (0, 1), margin), crop(m9, (0, 1), margin)
    rep["viii_not_pm"] = {"min": float(m8.min()), "ok": bool(m8.min() > tol.margin_floor)}
    rep["ix_rank"] = {"min": float(m9.min()), "ok": bool(m9.min() > tol.margin_floor)}

    sym = max(float(inn(np.abs(G @ Bx - np.swapaxes(G @ Bx, -1, -2)).max(axis=(-2, -1))).max()) for Bx in (B1, B2))
    rep["symmetry_BD"] = {"max": sym, "ok": sym <= bar}
    rep["threshold"] = bar
    rep["ok"] = all(v["ok"] for v in rep.values() if isinstance(v, dict) and "ok" in v)
    if keep_grids:
        rep["grids"] = {"iii_commutes": r3, "iv_codazzi": iv_worst, "v_ricci": v_worst, "vii_dpsi": r7}
    return rep


def _level1_product(geom, D):
    """(A - lam I) D on the level-1 grid."""
    B = geom.A - geom.lam[..., None, None] * np.eye(geom.n)
    return B @ D


def flatness_check(geom, L, margin=2, tol=DEFAULT):
    """det(A - lam I) - det((A - lam I) D_1) - det((A - lam I) D_2) on the horizontal space."""
    X = geom.X
    G = geom.G
    hm = geom.hmetric
    proj = np.linalg.solve(hm, np.swapaxes(X, -1, -2) @ G)  # horizontal coefficients of a vector
    B = geom.A - geom.lam[..., None, None] * np.eye(geom.n)
    MB = proj @ B @ X
    dB = np.linalg.det(MB)
    res = dB - np.linalg.det(MB @ L.Dbar1) - np.linalg.det(MB @ L.Dbar2)
    scale = np.abs(dB)
    flagged = scale <= tol.margin_floor
    rel = np.where(flagged, 0.0, np.abs(res) / np.where(flagged, 1.0, scale))
    rel = crop(rel, (0, 1), margin)
    return {
        "residual": res,
        "relative_max": float(rel.max()),
        "flagged_samples": int(flagged.sum()),
        "ok": bool(rel.max() <= tol.algebraic),
    }
