"""Codimension-two conformal deformation synthesised from a lifted triple.

The normal bundle E = M x L^4 carries the orthonormal sections
(mu, xi_1, xi_2, zeta), zeta time-like.  Together with the coordinate
tangents F_1..F_n of the isometric light-cone immersion F: M -> L^{n+4}
they form a moving frame whose derivatives along each coordinate axis are
linear in the frame, d_k R = Omega_k R.  Integrating that system line by
line and comparing two sweep orders certifies the structure equations
at grid scale.

Frame row layout used throughout: 0..n-1 tangents, then mu, xi_1, xi_2, zeta.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import GeometryError, first_bad_index
from scipy.interpolate import CubicSpline

from .grid import crop, d1, transport_from_seed
from .lorentz import LightConeModel, drop_isometric, euclidean_coords, metric_signature, minkowski_dot
from .triple import genuineness_margins

NORMAL_LABELS = ("mu", "xi1", "xi2", "zeta")
NORMAL_SIGNS = np.array([1.0, 1.0, 1.0, -1.0])


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


@dataclass
class FrameBundleData:
    """Connection and second fundamental form of E on the level-2 grid."""

    chart: object
    n: int
    G: np.ndarray
    Gamma: np.ndarray
    lam: np.ndarray
    forms: dict  # label -> lowered symmetric form <A_sigma X, Y>
    shapes: dict  # label -> A_sigma as (1,1)-tensor
    omega1: np.ndarray
    omega2: np.ndarray
    psi: np.ndarray
    ell: np.ndarray
    asymmetry: dict = field(default_factory=dict)

    @property
    def rank(self):
        return self.n + 4

    def connection_matrix(self):
        """C[..., k, s, t]: coefficient of section t in nabla_k of section s."""
        C = np.zeros(self.lam.shape + (self.n, 4, 4))
        w1, w2, psi, ell = self.omega1, self.omega2, self.psi, self.ell
        mu, x1, x2, ze = range(4)
        C[..., mu, x1], C[..., mu, x2], C[..., mu, ze] = -w1, -w2, -ell
        C[..., x1, mu], C[..., x1, ze], C[..., x1, x2] = w1, -w1, psi
        C[..., x2, mu], C[..., x2, ze], C[..., x2, x1] = w2, -w2, -psi
        C[..., ze, mu], C[..., ze, x1], C[..., ze, x2] = -ell, -w1, -w2
        return C

    def omega(self):
        """Omega[..., k, a, b] with d_k R_a = sum_b Omega_k[a, b] R_b."""
        n = self.n
        out = np.zeros(self.lam.shape + (n, n + 4, n + 4))
        # tangent rows: Gauss formula
        out[..., :, :n, :n] = np.moveaxis(self.Gamma, -3, -1)  # [k, j, m] = Gamma^m_kj
        for s, label in enumerate(NORMAL_LABELS):
            out[..., :, :n, n + s] = NORMAL_SIGNS[s] * self.forms[label]
            # Weingarten: d_k sigma = -A_sigma d_k + normal connection
            out[..., :, n + s, :n] = -np.swapaxes(self.shapes[label], -1, -2)
        out[..., :, n:, n:] = self.connection_matrix()
        return out

    def compatibility_residual(self):
        """Max deviation of the connection from metric compatibility with diag(1, 1, 1, -1)."""
        C = self.connection_matrix()
        eta = np.diag(NORMAL_SIGNS)
        lowered = C @ eta
        return float(np.abs(lowered + np.swapaxes(lowered, -1, -2)).max())


def build_bundle(geom, L, tol=DEFAULT, margin=2):
    """Assemble nabla-hat and alpha-hat from a lifted triple.

    The distinguished curvature is replaced by its leaf average, which is
    constant along the leaves by construction.
    """
    n = geom.n
    lv2 = geom.lvl2
    nl = len(geom.leaf)
    leaf_axes = tuple(range(2, 2 + nl))
    lam1 = np.broadcast_to(geom.lam.mean(axis=leaf_axes, keepdims=True), geom.lam.shape)
    lam = lv2(lam1)
    if np.any(~(lam > 0)):
        raise GeometryError("distinguished curvature not positive", index=first_bad_index(~(lam > 0)), stage="build_bundle")
    G = geom.G2
    Ginv = geom.Ginv2
    A = lv2(geom.A)
    B = A - lam[..., None, None] * np.eye(n)
    D1, D2 = lv2(L.D1), lv2(L.D2)
    raw = {"mu": G @ A, "xi1": G @ B @ D1, "xi2": G @ B @ D2, "zeta": G @ B}
    bar = tol.disc(geom.H.chart.h)
    asym = {}
    for label, M in raw.items():
        defect = np.abs(M - np.swapaxes(M, -1, -2)).max(axis=(-2, -1))
        asym[label] = float(crop(defect, (0, 1), margin).max())
    if max(asym["xi1"], asym["xi2"]) > bar:
        raise GeometryError(
            f"(A - lam I) D_i not self-adjoint: defect {max(asym['xi1'], asym['xi2']):.3e} exceeds {bar:.3e}",
            stage="build_bundle",
        )
    forms = {k: _sym(v) for k, v in raw.items()}
    shapes = {k: Ginv @ v for k, v in forms.items()}
    dlam = np.stack([geom.deriv(lam1, k) for k in range(n)], axis=-1)
    ell = np.stack([geom.deriv(np.log(lam1), k) for k in range(n)], axis=-1)
    omega1 = -np.einsum("...k,...kl->...l", dlam, D1) / lam[..., None]
    omega2 = -np.einsum("...k,...kl->...l", dlam, D2) / lam[..., None]
    psi = lv2(L.psi)
    return FrameBundleData(geom.chart2, n, G, geom.Gamma, lam, forms, shapes, omega1, omega2, psi, ell, asym)


# -- structure equations --------------------------------------------------------


def _grid_derivative(field, axis, h, count):
    if count < 3:
        return None
    return d1(field, axis, h, 4 if axis < 2 and count >= 5 else 2)


def covered_axes(chart):
    """Axes along which level-2 data can be differentiated."""
    return [k for k, c in enumerate(chart.counts) if c >= 3]


def structure_residuals(B, margin=2):
    """Curvature of the frame system, split into Gauss, Codazzi and Ricci blocks.

    The integrability condition of d_k R = Omega_k R is
    d_k Omega_l - d_l Omega_k + Omega_l Omega_k - Omega_k Omega_l = 0.
    It is evaluated for every coordinate pair along which the level-2 grid
    has at least three samples.
    """
    n = B.n
    Om = B.omega()
    axes = covered_axes(B.chart)
    h = B.chart.spacings
    cnt = B.chart.counts
    out = {"pairs": [], "gauss": 0.0, "ricci": {}, "codazzi": {}}
    worst = {"gauss": np.zeros(B.lam.shape)}
    pairs_ricci = [(s, t) for s in range(4) for t in range(s + 1, 4)]
    for s in range(4):
        worst[f"codazzi_{NORMAL_LABELS[s]}"] = np.zeros(B.lam.shape)
    for s, t in pairs_ricci:
        worst[f"ricci_{NORMAL_LABELS[s]}_{NORMAL_LABELS[t]}"] = np.zeros(B.lam.shape)
    for i, k in enumerate(axes):
        for l in axes[i + 1 :]:
            Ok, Ol = Om[..., k, :, :], Om[..., l, :, :]
            K = _grid_derivative(Ol, k, h[k], cnt[k]) - _grid_derivative(Ok, l, h[l], cnt[l]) + Ol @ Ok - Ok @ Ol
            out["pairs"].append([k, l])
            worst["gauss"] = np.maximum(worst["gauss"], np.abs(K[..., :n, :n]).max(axis=(-2, -1)))
            for s in range(4):
                c = np.maximum(np.abs(K[..., :n, n + s]).max(axis=-1), np.abs(K[..., n + s, :n]).max(axis=-1))
                key = f"codazzi_{NORMAL_LABELS[s]}"
                worst[key] = np.maximum(worst[key], c)
            for s, t in pairs_ricci:
                key = f"ricci_{NORMAL_LABELS[s]}_{NORMAL_LABELS[t]}"
                worst[key] = np.maximum(worst[key], np.abs(K[..., n + s, n + t]))
    inner = lambda x: crop(x, (0, 1), margin)
    for key, grid in worst.items():
        g = inner(grid)
        loc = [int(v) + (margin if j < 2 else 0) for j, v in enumerate(np.unravel_index(int(np.argmax(g)), g.shape))]
        entry = {"max": float(g.max()), "argmax": loc}
        if key == "gauss":
            out["gauss"] = entry
        elif key.startswith("codazzi"):
            out["codazzi"][key[len("codazzi_") :]] = entry
        else:
            out["ricci"][key[len("ricci_") :]] = entry
    out["grids"] = worst
    out["max"] = max(
        [out["gauss"]["max"]] + [v["max"] for v in out["codazzi"].values()] + [v["max"] for v in out["ricci"].values()]
    )
    return out


# -- moving-frame integration -----------------------------------------------------


def _line_coefficients(nodes, metric, h, substeps):
    """Coefficients of one line on a grid refined ``substeps`` times, with the
    tangent block made metric-compatible.

    With T the tangent block, d/dx <F_j, F_m> = (T g + g T^t)_jm while the
    frame is normal-orthogonal.  Adding E g^{-1} / 2 with
    E = g' - (T g + g T^t) makes that equal to the derivative g' of the
    spline through the sampled metric, so the integrated Gram matrix tracks
    the metric.  The Weingarten block is then rebuilt from the interpolated
    Gauss-formula block and the spline metric, so that the flow also keeps
    tangents and normals orthogonal.  Returns the fine coefficients
    (2 * substeps * (count - 1) + 1 samples) and the largest correction
    applied.
    """
    count = nodes.shape[0]
    x = h * np.arange(count)
    xf = np.linspace(0.0, x[-1], 2 * substeps * (count - 1) + 1)
    K = CubicSpline(x, nodes, axis=0)(xf)
    if metric is None:
        return K, 0.0
    n = metric.shape[-1]
    spline = CubicSpline(x, metric, axis=0)
    g, dg = spline(xf), spline(xf, 1)
    T = K[..., 1 : n + 1, 1 : n + 1]
    E = dg - (T @ g + g @ np.swapaxes(T, -1, -2))
    ginv = np.linalg.inv(g)
    corr = 0.5 * E @ ginv
    K[..., 1 : n + 1, 1 : n + 1] = T + corr
    gauss = K[..., 1 : n + 1, n + 1 :]
    weingarten = -NORMAL_SIGNS[:, None] * (np.swapaxes(gauss, -1, -2) @ ginv)
    shift = float(np.abs(weingarten - K[..., n + 1 :, 1 : n + 1]).max())
    K[..., n + 1 :, 1 : n + 1] = weingarten
    return K, max(float(np.abs(corr).max()), shift)


def _sweep(K, Y0, anchor, order, h, metric=None, substeps=4):
    """Integrate d_k Y = K_k Y through the grid, one axis after another.

    K: grid + (ndim, d, d); Y0: (d, q) at ``anchor``.  The first axis in
    ``order`` is integrated along the line through the anchor, each later
    axis from every sample already filled.  Each grid cell is crossed with
    ``substeps`` RK4 steps on spline-interpolated coefficients; with
    ``metric`` (grid + (n, n)) the tangent block is corrected as in
    ``_line_coefficients``.  Returns the solution and the largest correction.
    """
    ndim = K.ndim - 3
    perm = list(order) + [ndim, ndim + 1, ndim + 2]
    Kt = np.transpose(K, perm)
    Gt = None if metric is None else np.transpose(metric, list(order) + [ndim, ndim + 1])
    anchor_t = [anchor[a] for a in order]
    Y = np.asarray(Y0)
    worst = 0.0
    for i, ax in enumerate(order):
        index = tuple([slice(None)] * (i + 1) + [anchor_t[j] for j in range(i + 1, ndim)])
        block = Kt[index][..., ax, :, :]  # (n_0..n_i, d, d)
        nodes = np.moveaxis(block, i, 0)
        if nodes.shape[0] == 1:
            Y = np.expand_dims(Y, i)
            continue
        g = None if Gt is None else np.moveaxis(Gt[index], i, 0)
        fine, corr = _line_coefficients(nodes, g, h[ax], substeps)
        worst = max(worst, corr)
        line = transport_from_seed(fine[::2], fine[1::2], Y, h[ax] / substeps, anchor_t[i] * substeps)
        Y = np.moveaxis(line[::substeps], 0, i)
    inv = np.argsort(order)
    return np.transpose(Y, list(inv) + [ndim, ndim + 1]), worst


def _augmented(Om, n):
    """Add the position row: d_k F = F_k."""
    shape = Om.shape[:-2]
    d = n + 4
    K = np.zeros(shape + (d + 1, d + 1))
    K[..., 1:, 1:] = Om
    for k in range(n):
        K[..., k, 0, 1 + k] = 1.0
    return K


def anchor_index(chart):
    """Sample nearest to u = v = 0, middle of every leaf axis."""
    idx = []
    for k in range(chart.ndim):
        if k < 2:
            idx.append(chart.nearest_index(k, 0.0))
        else:
            idx.append(chart.counts[k] // 2)
    return tuple(idx)


def initial_frame(G, lam):
    """Frame at the anchor: tangents from a Cholesky factor, zeta = e_0,
    (mu, xi_1, xi_2) the trailing axes, and F = (zeta - mu)/lam."""
    n = G.shape[-1]
    d = n + 4
    Lc = np.linalg.cholesky(G)
    R = np.zeros((d + 1, d))
    R[1 : n + 1, 1 : n + 1] = Lc
    R[n + 1, n + 1] = 1.0  # mu
    R[n + 2, n + 2] = 1.0  # xi_1
    R[n + 3, n + 3] = 1.0  # xi_2
    R[n + 4, 0] = 1.0  # zeta
    R[0] = (R[n + 4] - R[n + 1]) / lam
    return R


@dataclass
class DeformationResult:
    chart: object
    n: int
    frame: np.ndarray  # grid + (n+5, n+4): position, tangents, mu, xi1, xi2, zeta
    frame_alt: np.ndarray
    F: np.ndarray  # gauge-fixed light-cone immersion
    lam: np.ndarray
    anchor: tuple
    report: dict = field(default_factory=dict)
    f: np.ndarray = None
    conformal_factor: np.ndarray = None

    @property
    def tangents(self):
        return self.frame[..., 1 : self.n + 1, :]

    @property
    def normals(self):
        return self.frame[..., self.n + 1 :, :]


def integrate_frame(B, model=None, tol=DEFAULT, margin=2, strict=True):
    """Integrate the moving frame along u, v, leaves and along v, u, leaves."""
    n = B.n
    if model is None:
        model = LightConeModel.canonical(n + 2)
    if model.dim != n + 4:
        raise GeometryError("light-cone model must live in L^{n+4}")
    chart = B.chart
    K = _augmented(B.omega(), n)
    anchor = anchor_index(chart)
    R0 = initial_frame(B.G[anchor], B.lam[anchor])
    h = chart.spacings
    ndim = chart.ndim
    order_a = list(range(ndim))
    order_b = [1, 0] + list(range(2, ndim))
    Ya, corr_a = _sweep(K, R0, anchor, order_a, h, B.G)
    Yb, corr_b = _sweep(K, R0, anchor, order_b, h, B.G)

    lam = B.lam
    mu, zeta = Ya[..., n + 1, :], Ya[..., n + 4, :]
    F = (zeta - mu) / lam[..., None]
    bar = tol.disc(chart.h)
    inner = lambda x: crop(x, (0, 1), margin)

    mismatch = np.abs(Ya - Yb).max(axis=(-2, -1))
    eta = np.diag(metric_signature(n + 4))
    gram = Ya[..., 1:, :] @ eta @ np.swapaxes(Ya[..., 1:, :], -1, -2)
    target = np.zeros(gram.shape)
    target[..., :n, :n] = B.G
    target[..., n:, n:] = np.diag(NORMAL_SIGNS)
    drift = np.abs(gram - target)
    tangent_gram = drift[..., :n, :n].max(axis=(-2, -1))
    normal_gram = drift[..., n:, n:].max(axis=(-2, -1))
    orthogonality = drift[..., :n, n:].max(axis=(-2, -1))
    light = np.abs(minkowski_dot(F, F))
    gauge = np.abs(Ya[..., 0, :] - F).max(axis=-1)

    report = {
        "anchor": [int(i) for i in anchor],
        "sweeps": [order_a, order_b],
        "path_mismatch_max": float(inner(mismatch).max()),
        "path_mismatch_full": float(mismatch.max()),
        "lightcone_max": float(light.max()),
        "normal_gram_drift_max": float(normal_gram.max()),
        "isometry_frame_max": float(inner(tangent_gram).max()),
        "normal_orthogonality_max": float(inner(orthogonality).max()),
        "position_gauge_drift_max": float(inner(gauge).max()),
        "compatibility_correction_max": max(corr_a, corr_b),
        "threshold": bar,
    }
    report["isometry_fd_max"] = isometry_residual(Ya[..., 0, :], chart, B.G, margin)
    report["ok"] = bool(
        report["path_mismatch_max"] <= bar
        and report["lightcone_max"] <= tol.lightcone
        and report["isometry_frame_max"] <= bar
        and report["isometry_fd_max"] <= bar
    )
    if strict and report["path_mismatch_max"] > bar:
        bad = inner(mismatch) > bar
        raise GeometryError(
            f"structure equations violated at scale h: sweep mismatch {report['path_mismatch_max']:.3e}",
            index=first_bad_index(bad),
            stage="integrate_frame",
        )
    return DeformationResult(chart, n, Ya, Yb, F, lam, anchor, report)


def _fd_jacobian(values, chart):
    """Derivatives of a grid field along every axis with at least three samples."""
    axes = covered_axes(chart)
    h = chart.spacings
    cnt = chart.counts
    return axes, np.stack([_grid_derivative(values, k, h[k], cnt[k]) for k in axes], axis=-2)


def isometry_residual(position, chart, G, margin=2):
    """max |<dF e_i, dF e_j> - G_ij| from finite differences of the position grid."""
    axes, J = _fd_jacobian(position, chart)
    eta = np.diag(metric_signature(position.shape[-1]))
    induced = J @ eta @ np.swapaxes(J, -1, -2)
    Gs = G[..., axes, :][..., :, axes]
    return float(crop(np.abs(induced - Gs).max(axis=(-2, -1)), (0, 1), margin).max())


def _orthonormal_gram(M, G):
    """Gram matrix M expressed in a G-orthonormal basis."""
    Lc = np.linalg.cholesky(G)
    Li = np.linalg.inv(Lc)
    return Li @ M @ np.swapaxes(Li, -1, -2)


def project_deformation(R, model=None, tol=DEFAULT, margin=2, G=None):
    """f = C(F) in R^{n+2} and its conformality residual.

    Two residuals are reported: one from finite differences of the f grid
    along every axis that has enough samples, one from the integrated
    tangent frame pushed through the projection, which covers all n
    directions.
    """
    n = R.n
    if model is None:
        model = LightConeModel.canonical(n + 2)
    F = R.F
    scale = minkowski_dot(F, model.w)
    bad = ~(scale > 0)
    if np.any(bad):
        raise GeometryError("light-cone projection failed: <F, w> <= 0", index=first_bad_index(bad), stage="project_deformation")
    f, phi = drop_isometric(F, model)
    if G is None:
        tang = R.tangents
        eta = np.diag(metric_signature(n + 4))
        G = tang @ eta @ np.swapaxes(tang, -1, -2)

    axes, J = _fd_jacobian(f, R.chart)
    Gs = G[..., axes, :][..., :, axes]
    M = J @ np.swapaxes(J, -1, -2)
    res_fd = np.abs(_orthonormal_gram(M, Gs) - (phi**2)[..., None, None] * np.eye(len(axes))).max(axis=(-2, -1))

    # tangent frame: d_k f = C(F_k / s - F <F_k, w> / s^2), C dropping to euclidean coordinates
    Fk = R.tangents
    s = scale[..., None, None]
    Fkw = minkowski_dot(Fk, model.w)[..., None]
    dF = Fk / s - F[..., None, :] * (Fkw / (s * s))
    Jf = euclidean_coords(dF, model)
    Mf = Jf @ np.swapaxes(Jf, -1, -2)
    res_frame = np.abs(_orthonormal_gram(Mf, G) - (phi**2)[..., None, None] * np.eye(n)).max(axis=(-2, -1))

    inner = lambda x: crop(x, (0, 1), margin)
    bar = tol.disc(R.chart.h)
    report = {
        "conformality_fd_max": float(inner(res_fd).max()),
        "conformality_fd_axes": axes,
        "conformality_frame_max": float(inner(res_frame).max()),
        "conformal_factor_range": [float(phi.min()), float(phi.max())],
        "threshold": bar,
    }
    report["ok"] = bool(report["conformality_fd_max"] <= bar and report["conformality_frame_max"] <= bar)
    R.f = f
    R.conformal_factor = phi
    R.report["projection"] = report
    return f, report


def conformality_residual(f, chart, G, phi, margin=2):
    """|<df e_i, df e_j> - phi^2 delta_ij| over G-orthonormal pairs, from finite differences of f."""
    axes, J = _fd_jacobian(f, chart)
    Gs = G[..., axes, :][..., :, axes]
    M = J @ np.swapaxes(J, -1, -2)
    res = np.abs(_orthonormal_gram(M, Gs) - (phi**2)[..., None, None] * np.eye(len(axes))).max(axis=(-2, -1))
    return float(crop(res, (0, 1), margin).max())


def genuineness_diagnostics(L, geom=None, margin=2):
    """Margins of the two sufficient conditions for a genuine deformation.

    These are sufficient conditions only; the report never claims more.
    """
    metric = geom.hmetric if geom is not None else np.broadcast_to(np.eye(2), L.Dbar1.shape)
    m8, m9 = genuineness_margins(L.Dbar1, L.Dbar2, metric)
    if m8.ndim >= 2 and m8.shape[0] > 2 * margin and m8.shape[1] > 2 * margin:
        m8, m9 = crop(m8, (0, 1), margin), crop(m9, (0, 1), margin)
    out = {}
    for key, grid in (("not_plus_minus", m8), ("rank_two", m9)):
        loc = np.unravel_index(int(np.argmin(grid)), grid.shape)
        out[key] = {"min": float(grid.min()), "argmin": [int(i) for i in loc]}
    out["note"] = "margins of sufficient conditions; genuineness itself is not decided"
    return out


def check_genuine(L, geom=None, tol=DEFAULT, margin=2):
    """Raise when either genuineness margin collapses to the floor."""
    rep = genuineness_diagnostics(L, geom, margin)
    for key in ("not_plus_minus", "rank_two"):
        if rep[key]["min"] <= tol.margin_floor:
            raise GeometryError(f"triple is not admissible: {key} margin {rep[key]['min']:.3e}", stage="genuineness")
    return rep
