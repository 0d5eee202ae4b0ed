"""Surface builders and the stage chain shared by the CLI and the tests."""

from dataclasses import dataclass, field

import numpy as np

from .congruence import envelope_reconstruct, envelope_report, example_surface, gallery_spec, isothermal_reparam
from .cs_solver import CsCandidate, evaluate_candidate
from .deformation import (
    build_bundle,
    genuineness_diagnostics,
    integrate_frame,
    project_deformation,
    structure_residuals,
)
from .errors import GeometryError
from .grid import GridChart, crop
from .hypersurface import check_not_surface_like, shape_operator
from .surface import interior
from .triple import lift_to_M, reconstruct_bar_triple, triple_distance, verify_bar_conditions, verify_conditions_i_ix


def _source_u_range(half_width):
    # isothermal ut grows at least as fast as u, so this covers [-w, w] in ut
    return (-half_width - 0.25, half_width + 0.25)


def cs_surface(cfg, h=None, fd_order=2):
    """Isothermal gallery surface on the square [-w, w]^2 with spacing h."""
    h = cfg.surface_h if h is None else h
    w = cfg.surface_half_width
    N = int(round(2 * w / h)) + 1
    spec = gallery_spec(cfg.n, cfg.variant, cfg.rate)
    S0 = example_surface(spec, GridChart.from_ranges([_source_u_range(w), (-w, w)], (N, N)), fd_order=fd_order)
    return isothermal_reparam(S0, chart=GridChart.from_ranges([(-w, w), (-w, w)], (N, N)))


def m_surface(cfg, h=None, counts=None):
    """Isothermal gallery surface on the (u, v) part of the M-grid."""
    h = cfg.h if h is None else h
    N = cfg.counts if counts is None else counts
    dom = h * (N - 1) / 2
    spec = gallery_spec(cfg.n, cfg.variant, cfg.rate)
    S0 = example_surface(spec, GridChart.from_ranges([_source_u_range(dom), (-dom, dom)], (N, N)), fd_order=cfg.fd_order)
    return isothermal_reparam(S0, chart=GridChart.from_ranges([(-dom, dom), (-dom, dom)], (N, N)))


def christoffel_errors(S):
    """Interior max errors of Gamma^1 against 0 and Gamma^2 against -tanh ut."""
    ut = S.chart.axis(0)
    exact2 = np.broadcast_to(-np.tanh(ut)[:, None], S.chart.shape)
    return float(np.abs(interior(S.gamma1)).max()), float(np.abs(interior(S.gamma2 - exact2)).max())


def candidates_from(cfg):
    out = []
    for spec in cfg.candidates:
        c = CsCandidate.from_dict(spec)
        c.label = c.label or c.describe()
        out.append((c, spec.get("expect", "member")))
    return out


@dataclass
class MGeometry:
    """Everything on the M-grid that does not depend on a candidate."""

    cfg: object
    h: float
    margin: int
    S: object
    H: object
    geom: object
    reports: dict = field(default_factory=dict)


def m_geometry(cfg, refine=0):
    """Surface, envelope and shape operator on the M-grid, refined 2^refine times."""
    scale = 2**refine
    h = cfg.h / scale
    N = scale * (cfg.counts - 1) + 1
    S = m_surface(cfg, h, N)
    tol = cfg.tolerances
    # leaf spacing follows h, so the leaf sample counts stay fixed under refinement
    H = envelope_reconstruct(S, cfg.leaf_counts, h)
    geom = shape_operator(H, tol)
    M = MGeometry(cfg, h, cfg.lifted_margin * scale, S, H, geom)
    M.reports["envelope"] = envelope_report(S, H, tol=tol, margin=cfg.surface_margin)
    M.reports["splitting"] = check_not_surface_like(geom, tol, cfg.surface_margin)
    M.reports["dupin"] = leaf_variation(geom.lam, H.leaf_axes, h, cfg.surface_margin)
    return M


def leaf_variation(lam, leaf_axes, h, margin=2):
    """Largest |d lambda| along the leaf axes; zero for a Dupin curvature up to O(h^2)."""
    worst = max(float(np.abs(crop(np.gradient(lam, h, axis=a), (0, 1), margin)).max()) for a in leaf_axes)
    return {"leaf_dlam_max": worst, "scale": float(np.abs(lam).max())}


def member_chain(cand, M, deform=True):
    """Membership, triple, lift, (i)-(ix) and optionally the deformation for one candidate.

    Returns (stages, objects).  Every stage entry carries its residuals and an
    ``ok`` flag.  A GeometryError from a stage is recorded with its stage tag
    and stops the chain.
    """
    tol = M.cfg.tolerances
    stages = {}
    objs = {}
    try:
        evaluate_candidate(cand, M.S, tol, M.cfg.surface_margin)
        stages["membership"] = dict(cand.report, ok=bool(cand.verdict))
        if not cand.verdict:
            raise GeometryError(f"candidate {cand.describe()} is not in C_s", stage="membership")
        T = reconstruct_bar_triple(cand, M.S, tol)
        objs["triple"] = T
        rep = verify_bar_conditions(T, M.S, tol, M.cfg.surface_margin)
        rep["consistency"] = T.consistency
        rep["vieta_max"] = max(T.consistency.get("vieta_sum_max", 0.0), T.consistency.get("vieta_product_max", 0.0))
        stages["triple"] = rep
        L = lift_to_M(T, M.geom)
        objs["lifted"] = L
        stages["lifted"] = verify_conditions_i_ix(L, M.geom, tol, M.margin)
        stages["genuineness"] = genuineness_diagnostics(L, M.geom, M.cfg.surface_margin)
        stages["genuineness"]["ok"] = bool(
            min(stages["genuineness"]["not_plus_minus"]["min"], stages["genuineness"]["rank_two"]["min"]) > tol.margin_floor
        )
        if deform:
            B = build_bundle(M.geom, L, tol, M.cfg.surface_margin)
            objs["bundle"] = B
            sr = structure_residuals(B, M.cfg.surface_margin)
            stages["structure"] = _structure_summary(sr, B, tol)
            R = integrate_frame(B, tol=tol, margin=M.cfg.surface_margin)
            objs["deformation"] = R
            stages["integrate"] = dict(R.report)
            _, prep = project_deformation(R, tol=tol, margin=M.cfg.surface_margin, G=B.G)
            stages["project"] = prep
            stages["integrate"].pop("projection", None)
    except GeometryError as exc:
        stages["failure"] = {"stage": exc.stage or "unknown", "message": str(exc), "index": exc.index, "ok": False}
    return stages, objs


def _structure_summary(sr, B, tol):
    out = {
        "pairs": [list(p) for p in sr["pairs"]],
        "gauss_max": float(sr["gauss"]["max"]),
        "codazzi_max": {k: float(v["max"]) for k, v in sr["codazzi"].items()},
        "ricci_max": {k: float(v["max"]) for k, v in sr["ricci"].items()},
        "max": float(sr["max"]),
        "threshold": tol.disc(B.chart.h),
    }
    out["ok"] = bool(out["max"] <= out["threshold"])
    return out


def chain_ok(stages, expect="member"):
    """A member passes when every stage passes; a non-member when membership refuses it."""
    if expect == "non-member":
        f = stages.get("failure")
        return bool(f is not None and f["stage"] == "membership")
    return "failure" not in stages and all(s.get("ok", True) for s in stages.values() if isinstance(s, dict))


def pairwise_distances(triples, margin=2):
    """Normalised max-norm distances between every pair of labelled triples."""
    out = []
    labels = sorted(triples)
    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            out.append({"a": a, "b": b, "distance": triple_distance(triples[a], triples[b], margin)})
    return out
