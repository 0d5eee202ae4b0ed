"""Membership of boundary data in the deformation set of a surface.

Hyperbolic surfaces take a pair (U(u), V(v)).  U is carried off the seed
line v = v0 by phi_v = 2 Gamma^1 phi and V off u = u0 by phi_u = 2 Gamma^2 phi.
The candidate belongs to the set when rho = sqrt|2(phi^U + phi^V) + 1|
solves Q(rho) = 0.

Elliptic surfaces take complex data on the line v = v0, transported by
d_zbar phi = 2 Gamma phi, with rho = sqrt(-(4 Re phi + 1)).
"""

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import GeometryError, first_bad_index
from .grid import d1, midpoints, transport_from_seed
from .surface import interior, q_operator

# -- boundary data ---------------------------------------------------------------


def parse_expr(expr):
    """Normalise a boundary-function description to a dict.

    Accepted forms: a number, a list of samples, "const k", "poly c0 c1 ...",
    "U_from_lambda c", "const_V k", or the equivalent dicts.
    """
    if isinstance(expr, dict):
        if "samples" in expr:
            return {"samples": np.asarray(expr["samples"], dtype=complex if expr.get("complex") else float)}
        for key in ("const", "const_V", "U_from_lambda", "poly"):
            if key in expr:
                out = dict(expr)
                if key == "poly":
                    out["poly"] = [complex(*c) if isinstance(c, (list, tuple)) else c for c in expr["poly"]]
                return out
        raise GeometryError(f"unrecognised boundary expression {expr!r}")
    if isinstance(expr, (int, float, complex)):
        return {"const": expr}
    if isinstance(expr, (list, tuple, np.ndarray)):
        return {"samples": np.asarray(expr)}
    if isinstance(expr, str):
        head, *rest = expr.split()
        try:
            nums = [complex(x) if "j" in x else float(x) for x in rest]
        except ValueError as exc:
            raise GeometryError(f"bad number in expression {expr!r}") from exc
        if head in ("const", "const_V", "U_from_lambda") and len(nums) == 1:
            return {head: nums[0]}
        if head == "poly" and nums:
            return {"poly": nums}
        raise GeometryError(f"unrecognised boundary expression {expr!r}")
    raise GeometryError(f"unrecognised boundary expression {expr!r}")


def eval_expr(expr, x, E_line=None):
    """Samples of a boundary function on the axis ``x``.

    ``E_line`` is the metric coefficient E along the seed line; it is only
    needed by the U_from_lambda family U = c - factor * e^{-2 lam} with
    e^{2 lam} = E in isothermal coordinates.
    """
    e = parse_expr(expr)
    x = np.asarray(x, float)
    if "samples" in e:
        vals = e["samples"]
        if vals.shape != x.shape:
            raise GeometryError(f"boundary samples have shape {vals.shape}, axis has {x.shape}")
        return vals
    if "const" in e:
        return np.full(x.shape, e["const"], dtype=complex if isinstance(e["const"], complex) else float)
    if "const_V" in e:
        return np.full(x.shape, float(e["const_V"]))
    if "poly" in e:
        coef = e["poly"]
        return sum(c * x**k for k, c in enumerate(coef)) + 0 * x
    if "U_from_lambda" in e:
        if E_line is None:
            raise GeometryError("U_from_lambda needs the metric along the seed line")
        return float(e["U_from_lambda"]) - float(e.get("factor", 0.5)) / np.asarray(E_line)
    raise GeometryError(f"unrecognised boundary expression {expr!r}")


def describe(expr):
    e = parse_expr(expr)
    if "samples" in e:
        return f"samples[{len(e['samples'])}]"
    for key in ("const", "const_V", "U_from_lambda"):
        if key in e:
            extra = f" factor={e['factor']}" if "factor" in e else ""
            return f"{key} {e[key]}{extra}"
    return "poly " + " ".join(str(c) for c in e["poly"])


# -- candidates ---------------------------------------------------------------


@dataclass
class CsCandidate:
    kind: str
    U: object = None
    V: object = None
    zeta: object = None
    normalize_by_conformal_factor: bool = True
    label: str = ""
    phi_U: np.ndarray = None
    phi_V: np.ndarray = None
    phi_zeta: np.ndarray = None
    rho: np.ndarray = None
    branch: str = None
    residual: float = None
    residual_at: tuple = None
    verdict: bool = None
    report: dict = field(default_factory=dict)

    def describe(self):
        if self.kind == "hyperbolic":
            return self.label or f"U={describe(self.U)}, V={describe(self.V)}"
        return self.label or f"zeta={describe(self.zeta)}"

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind", "hyperbolic")
        if kind not in ("hyperbolic", "elliptic"):
            raise GeometryError(f"unknown candidate kind {kind!r}")
        if kind == "hyperbolic" and ("U" not in data or "V" not in data):
            raise GeometryError("hyperbolic candidates need U and V")
        if kind == "elliptic" and "zeta" not in data:
            raise GeometryError("elliptic candidates need zeta")
        return cls(
            kind,
            U=data.get("U"),
            V=data.get("V"),
            zeta=data.get("zeta"),
            normalize_by_conformal_factor=bool(data.get("normalize_by_conformal_factor", True)),
            label=data.get("label", ""),
        )


def seed_indices(chart):
    """Grid indices of u = 0 and v = 0 (nearest sample), with the offset from the true axis."""
    iu = chart.nearest_index(0, 0.0)
    iv = chart.nearest_index(1, 0.0)
    shift = (float(chart.axis(0)[iu]), float(chart.axis(1)[iv]))
    return iu, iv, shift


def _line_transport(coef, seed_values, h, seed, axis):
    """Solve d phi / dx = coef * phi along ``axis`` from the samples at index ``seed``."""
    c = np.moveaxis(coef, axis, 0)
    mids = midpoints(c, h, 0)
    k_nodes = c[..., None, None]
    k_mid = mids[..., None, None]
    y0 = np.asarray(seed_values)[..., None, None]
    out = transport_from_seed(k_nodes, k_mid, y0, h, seed)[..., 0, 0]
    return np.moveaxis(out, 0, axis)


def transport_hyperbolic(U, V, S, normalize=True):
    """phi^U, phi^V on the grid of S from boundary data on the seed lines."""
    iu, iv, shift = seed_indices(S.chart)
    hu, hv = S.chart.spacings
    E = S.E
    u_axis, v_axis = S.chart.axis(0), S.chart.axis(1)
    U_s = np.asarray(eval_expr(U, u_axis, E[:, iv]), float)
    V_s = np.asarray(eval_expr(V, v_axis, E[iu, :]), float)
    if normalize:
        U_s = U_s * E[:, iv]
        V_s = V_s * E[iu, :]
    phi_U = _line_transport(2.0 * S.gamma1, U_s, hv, iv, axis=1)
    phi_V = _line_transport(2.0 * S.gamma2, V_s, hu, iu, axis=0)
    return phi_U, phi_V, {"seed_index": (iu, iv), "seed_offset": shift}


def transport_elliptic(zeta, S, gamma=None):
    """phi^zeta from data on v = v0 by phi_v = i (phi_u - 4 Gamma phi).

    The Cauchy problem for d_zbar is ill-posed: a mode of wavelength ~h grows
    like exp(L/h) over a v-extent L.  The growth bound is returned so
    callers can judge round-off amplification.
    """
    iu, iv, shift = seed_indices(S.chart)
    hu, hv = S.chart.spacings
    gam = S.complex_christoffel() if gamma is None else np.broadcast_to(np.asarray(gamma, complex), S.chart.shape)
    u_axis = S.chart.axis(0)
    seed = np.asarray(eval_expr(zeta, u_axis), complex)

    def rhs(phi, g):
        return 1j * (d1(phi, 0, hu) - 4.0 * g * phi)

    nv = S.chart.counts[1]
    gam_mid = midpoints(gam.real, hv, 1) + 1j * midpoints(gam.imag, hv, 1)
    out = np.empty(S.chart.shape, complex)
    out[:, iv] = seed
    for direction in (1, -1):
        phi = seed.copy()
        j = iv
        h = direction * hv
        while 0 <= j + direction < nv:
            jm = j if direction > 0 else j - 1
            g0, gm, g1 = gam[:, j], gam_mid[:, jm], gam[:, j + direction]
            k1 = rhs(phi, g0)
            k2 = rhs(phi + 0.5 * h * k1, gm)
            k3 = rhs(phi + 0.5 * h * k2, gm)
            k4 = rhs(phi + h * k3, g1)
            phi = phi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            j += direction
            out[:, j] = phi
    extent = max(iv, nv - 1 - iv) * hv
    return out, {"seed_index": (iu, iv), "seed_offset": shift, "growth_bound": float(np.exp(extent / hu))}


# -- sign conditions and rho ------------------------------------------------------

BRANCHES = ("U,V>0", "0<2U<-(2V+1)", "0<2V<-(2U+1)")


def sign_conditions(phi_U=None, phi_V=None, phi_zeta=None, kind="hyperbolic"):
    """Per-sample validity and the branch that holds on every sample (or None)."""
    if kind == "hyperbolic":
        pu, pv = np.asarray(phi_U, float), np.asarray(phi_V, float)
        masks = [
            (pu > 0) & (pv > 0),
            (0 < 2 * pu) & (2 * pu < -(2 * pv + 1)),
            (0 < 2 * pv) & (2 * pv < -(2 * pu + 1)),
        ]
        valid = masks[0] | masks[1] | masks[2]
        branch = next((name for name, m in zip(BRANCHES, masks) if np.all(m)), None)
        return valid, branch
    if kind == "elliptic":
        pz = np.asarray(phi_zeta, complex)
        valid = (np.abs(pz + 0.5) > 0) & (4 * pz.real + 1 < 0)
        return valid, ("4Re+1<0" if np.all(valid) else None)
    raise GeometryError(f"unknown candidate kind {kind!r}")


def rho_field(phi_U=None, phi_V=None, phi_zeta=None, kind="hyperbolic", floor=1e-12):
    if kind == "hyperbolic":
        rad = np.abs(2.0 * (np.asarray(phi_U) + np.asarray(phi_V)) + 1.0)
    else:
        rad = -(4.0 * np.real(phi_zeta) + 1.0)
    bad = ~(rad > floor)
    if np.any(bad):
        raise GeometryError("degenerate candidate: radicand of rho vanishes", index=first_bad_index(bad), stage="rho")
    return np.sqrt(rad)


def membership_residual(rho, S, kind="hyperbolic", tol=DEFAULT, margin=2):
    """max |Q(rho)| on the interior, its location and the verdict."""
    q = np.abs(interior(q_operator(rho, S, kind), margin))
    loc = np.unravel_index(int(np.argmax(q)), q.shape)
    loc = tuple(int(i) + margin for i in loc)
    scale = float(np.max(np.abs(rho)))
    bar = tol.disc(S.h) * scale
    res = float(q.max())
    return res, loc, res <= bar, bar


def evaluate_candidate(cand, S, tol=DEFAULT, margin=2):
    """Transport, sign check, rho and Q-residual; fills the candidate in place."""
    if cand.kind == "hyperbolic":
        cand.phi_U, cand.phi_V, info = transport_hyperbolic(cand.U, cand.V, S, cand.normalize_by_conformal_factor)
        valid, branch = sign_conditions(cand.phi_U, cand.phi_V)
    else:
        cand.phi_zeta, info = transport_elliptic(cand.zeta, S)
        valid, branch = sign_conditions(phi_zeta=cand.phi_zeta, kind="elliptic")
    cand.branch = branch
    cand.report = dict(info, sign_valid_fraction=float(np.mean(valid)), branch=branch)
    if branch is None:
        cand.verdict = False
        cand.report["reason"] = "sign conditions fail"
        if not np.all(valid):
            cand.report["first_bad_sample"] = first_bad_index(~valid)
        return cand
    try:
        cand.rho = rho_field(cand.phi_U, cand.phi_V, cand.phi_zeta, cand.kind)
    except GeometryError as exc:
        cand.verdict = False
        cand.report["reason"] = str(exc)
        return cand
    res, loc, ok, bar = membership_residual(cand.rho, S, cand.kind, tol, margin)
    cand.residual, cand.residual_at, cand.verdict = res, loc, bool(ok)
    cand.report.update(residual=res, residual_at=list(loc), threshold=bar, rho_max=float(np.max(cand.rho)))
    return cand


def gallery_candidates():
    """The standard candidates on the example surface."""
    return [
        CsCandidate("hyperbolic", U="const 1", V="const_V 1", label="V=1"),
        CsCandidate("hyperbolic", U="const 1", V="const_V 2", label="V=2"),
        CsCandidate("hyperbolic", U={"U_from_lambda": 2.0}, V="poly 1 0 1", label="U=2-exp(-2lam)/2"),
        CsCandidate("hyperbolic", U="poly 1 0 1", V="poly 1 0 1", label="U=1+u^2, V=1+v^2"),
    ]
