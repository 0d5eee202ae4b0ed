"""confdef command line: gallery, cs-check, triple, deform, pipeline, verify.

Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 for
usage or IO errors.  Each command writes ``<out>/<command>.json``; with
``--emit-csv`` the raw grids go under ``<out>/<command>/`` and the JSON
lists them so that ``verify`` can recompute the residuals from CSV alone.
"""

import argparse
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import GeometryError
from .io import digest, read_json, write_grid_csv, write_json
from .workflow import (
    candidates_from,
    chain_ok,
    christoffel_errors,
    cs_surface,
    m_geometry,
    m_surface,
    member_chain,
    pairwise_distances,
)
from .cs_solver import evaluate_candidate
from .triple import reconstruct_bar_triple, verify_bar_conditions

EXIT_PASS, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def slug(label):
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_") or "candidate"


# -- report assembly ------------------------------------------------------------


class Report:
    """Checks (value, threshold, relation, verdict) plus free-form details."""

    def __init__(self, command, cfg, refine):
        self.command = command
        self.cfg = cfg
        self.refine = refine
        self.checks = []
        self.details = {}
        self.convergence = []
        self.files = {}
        self.rechecks = []

    def check(self, name, value, threshold, relation="le"):
        value = float(value)
        if relation == "le":
            ok = value <= threshold
        elif relation == "gt":
            ok = value > threshold
        else:
            raise ValueError(relation)
        self.checks.append({"name": name, "value": value, "threshold": float(threshold), "relation": relation, "ok": bool(ok)})
        return ok

    def flag(self, name, ok, note=""):
        self.checks.append({"name": name, "value": None, "threshold": None, "relation": "flag", "ok": bool(ok), "note": note})
        return ok

    @property
    def ok(self):
        return all(c["ok"] for c in self.checks)

    def to_dict(self):
        cfg = self.cfg.to_dict()
        return {
            "command": self.command,
            "verdict": "pass" if self.ok else "fail",
            "provenance": {"config_hash": digest(cfg), "seed": self.cfg.seed, "version": __version__, "refine": self.refine},
            "config": cfg,
            "checks": self.checks,
            "details": self.details,
            "convergence": self.convergence,
            "files": self.files,
            "rechecks": self.rechecks,
        }

    def table(self):
        lines = [f"{self.command}: {'PASS' if self.ok else 'FAIL'}"]
        for c in self.checks:
            tag = "ok  " if c["ok"] else "FAIL"
            if c["relation"] == "flag":
                lines.append(f"  {tag} {c['name']}  {c.get('note', '')}")
            else:
                op = "<=" if c["relation"] == "le" else ">"
                lines.append(f"  {tag} {c['name']:<48s} {c['value']:.3e} {op} {c['threshold']:.3e}")
        for row in self.convergence:
            lines.append("  conv " + "  ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _orders(rows, keys):
    """Observed order log2(e_prev / e) for each key between consecutive rows."""
    for prev, cur in zip(rows, rows[1:]):
        for k in keys:
            a, b = prev.get(k), cur.get(k)
            if a and b and a > 0 and b > 0:
                cur[f"order_{k}"] = math.log2(a / b)


# -- membership -------------------------------------------------------------------


def _membership(rep, cfg, h, emit_dir=None, tag=""):
    S = cs_surface(cfg, h)
    tol = cfg.tolerances
    out = {}
    for cand, expect in candidates_from(cfg):
        evaluate_candidate(cand, S, tol, cfg.surface_margin)
        out[cand.label] = {
            "expect": expect,
            "verdict": "member" if cand.verdict else "non-member",
            "residual": cand.residual,
            "threshold": cand.report.get("threshold"),
            "branch": cand.branch,
            "reason": cand.report.get("reason"),
        }
        if emit_dir is not None and cand.rho is not None:
            name = f"{tag}rho_{slug(cand.label)}.csv"
            write_grid_csv(emit_dir / name, cand.rho, S.chart, ["u", "v"], {"field": "rho", "candidate": cand.label})
            rep.files[name] = {"field": "rho", "candidate": cand.label}
            rep.rechecks.append(
                {
                    "kind": "membership",
                    "candidate": cand.label,
                    "files": {"rho": name, "surface": f"{tag}surface.csv"},
                    "margin": cfg.surface_margin,
                    "disc_const": tol.disc_const,
                    "residual": cand.residual,
                    "member": bool(cand.verdict),
                }
            )
    if emit_dir is not None:
        name = f"{tag}surface.csv"
        comps = np.stack([S.gamma1, S.gamma2, S.F], axis=-1)
        write_grid_csv(emit_dir / name, comps, S.chart, ["u", "v"], {"field": "gamma1, gamma2, F"})
        rep.files[name] = {"field": "gamma1, gamma2, F"}
    return S, out


def _membership_checks(rep, results):
    for label, r in results.items():
        if r["residual"] is None:
            rep.flag(f"membership[{label}] expect {r['expect']}", r["expect"] == "non-member", r.get("reason") or "")
        elif r["expect"] == "member":
            rep.check(f"membership[{label}] |Q(rho)|", r["residual"], r["threshold"], "le")
        else:
            rep.check(f"membership[{label}] |Q(rho)| non-member", r["residual"], r["threshold"], "gt")


def cmd_gallery(cfg, out, refine=0, emit_csv=False):
    rep = Report("gallery", cfg, refine)
    emit = out / "gallery" if emit_csv else None
    bar = cfg.tolerances.disc
    rows = []
    for j in range(refine + 1):
        h = cfg.surface_h / 2**j
        S, memb = _membership(rep, cfg, h, emit if j == 0 else None)
        g1, g2 = christoffel_errors(S)
        row = {"h": h, "gamma1_max": g1, "gamma2_error": g2}
        row.update({f"Q[{k}]": v["residual"] for k, v in memb.items() if v["residual"] is not None})
        rows.append(row)
        if j == 0:
            rep.check("Gamma^1 max (exact 0)", g1, bar(h))
            rep.check("Gamma^2 + tanh(ut) max", g2, bar(h))
            _membership_checks(rep, memb)
            rep.details["membership"] = memb
            rep.details["surface"] = {"n": cfg.n, "variant": cfg.variant, "rate": cfg.rate, "grid": list(S.chart.shape), "h": h}
            if emit is not None:
                rep.rechecks.append({"kind": "christoffel", "files": {"surface": "surface.csv"}, "gamma1_max": g1, "gamma2_error": g2, "margin": 2})
    _orders(rows, ["gamma2_error"] + [k for k in rows[0] if k.startswith("Q[")])
    rep.convergence = rows
    return rep


def cmd_cs_check(cfg, out, refine=0, emit_csv=False):
    rep = Report("cs-check", cfg, refine)
    emit = out / "cs-check" if emit_csv else None
    rows = []
    for j in range(refine + 1):
        h = cfg.surface_h / 2**j
        _, memb = _membership(rep, cfg, h, emit if j == 0 else None)
        if j == 0:
            _membership_checks(rep, memb)
            rep.details["membership"] = memb
        else:
            # verdicts must not change under refinement
            for k, v in memb.items():
                base = rep.details["membership"][k]["verdict"]
                rep.flag(f"membership[{k}] stable at h={h:g}", v["verdict"] == base, v["verdict"])
        rows.append(dict({"h": h}, **{f"Q[{k}]": v["residual"] for k, v in memb.items() if v["residual"] is not None}))
    _orders(rows, [k for k in rows[0] if k.startswith("Q[")])
    rep.convergence = rows
    return rep


# -- triples ----------------------------------------------------------------------


def _surface_triples(cfg, h, N):
    S = m_surface(cfg, h, N)
    tol = cfg.tolerances
    triples, reports = {}, {}
    for cand, expect in candidates_from(cfg):
        evaluate_candidate(cand, S, tol, cfg.surface_margin)
        if not cand.verdict:
            reports[cand.label] = {"membership": False, "expect": expect}
            continue
        T = reconstruct_bar_triple(cand, S, tol)
        r = verify_bar_conditions(T, S, tol, cfg.surface_margin)
        r["vieta_max"] = max(T.consistency["vieta_sum_max"], T.consistency["vieta_product_max"])
        r["consistency"] = T.consistency
        r["membership"] = True
        r["expect"] = expect
        triples[cand.label] = T
        reports[cand.label] = r
    return S, triples, reports


def _triple_checks(rep, label, r, tol):
    rep.check(f"triple[{label}] (a) det Dbar_i - 1/2", r["a_det"]["max"], tol.identity)
    rep.check(f"triple[{label}] Vieta", r["vieta_max"], tol.identity)
    rep.check(f"triple[{label}] (b) Codazzi", r["b_codazzi"]["max"], r["threshold"])
    rep.check(f"triple[{label}] (c) d psi", r["c_dpsi"]["max"], r["threshold"])
    rep.check(f"triple[{label}] (d) margin", r["d_not_pm"]["min"], tol.margin_floor, "gt")
    rep.check(f"triple[{label}] (e) margin", r["e_rank"]["min"], tol.margin_floor, "gt")


def _emit_triple(rep, emit, S, T, label, cfg, r):
    name = f"triple_{slug(label)}.csv"
    comps = np.concatenate([T.D1.reshape(T.D1.shape[:2] + (4,)), T.D2.reshape(T.D2.shape[:2] + (4,)), T.psi], axis=-1)
    write_grid_csv(emit / name, comps, S.chart, ["u", "v"], {"field": "D1 (4), D2 (4), psi (2)", "candidate": label})
    rep.files[name] = {"field": "D1, D2, psi", "candidate": label}
    rep.rechecks.append(
        {
            "kind": "triple",
            "candidate": label,
            "files": {"triple": name, "geometry": "triple_surface.csv"},
            "fd_order": S.fd_order,
            "margin": cfg.surface_margin,
            "disc_const": cfg.tolerances.disc_const,
            "a_det": r["a_det"]["max"],
            "b_codazzi": r["b_codazzi"]["max"],
            "c_dpsi": r["c_dpsi"]["max"],
            "d_not_pm": r["d_not_pm"]["min"],
            "e_rank": r["e_rank"]["min"],
            "ok": bool(r["b_codazzi"]["ok"] and r["c_dpsi"]["ok"] and r["d_not_pm"]["ok"] and r["e_rank"]["ok"]),
        }
    )


def _emit_surface_geometry(rep, emit, S):
    name = "triple_surface.csv"
    comps = np.concatenate([S.metric.reshape(S.chart.shape + (4,)), S.christoffel.reshape(S.chart.shape + (8,))], axis=-1)
    write_grid_csv(emit / name, comps, S.chart, ["u", "v"], {"field": "metric (4), christoffel (8)"})
    rep.files[name] = {"field": "metric, christoffel"}


def cmd_triple(cfg, out, refine=0, emit_csv=False):
    rep = Report("triple", cfg, refine)
    emit = out / "triple" if emit_csv else None
    tol = cfg.tolerances
    rows = []
    for j in range(refine + 1):
        scale = 2**j
        h = cfg.h / scale
        S, triples, reports = _surface_triples(cfg, h, scale * (cfg.counts - 1) + 1)
        row = {"h": h}
        for label, r in reports.items():
            if r["membership"]:
                row[f"b[{label}]"] = r["b_codazzi"]["max"]
                row[f"c[{label}]"] = r["c_dpsi"]["max"]
        rows.append(row)
        if j > 0:
            continue
        for label, r in reports.items():
            if not r["membership"]:
                rep.flag(f"triple[{label}] skipped, not a member", r["expect"] == "non-member")
                continue
            rep.flag(f"triple[{label}] membership as expected", r["expect"] == "member")
            _triple_checks(rep, label, r, tol)
            if emit is not None:
                _emit_triple(rep, emit, S, triples[label], label, cfg, r)
        if emit is not None:
            _emit_surface_geometry(rep, emit, S)
        dists = pairwise_distances(triples, cfg.surface_margin)
        for d in dists:
            rep.check(f"distance[{d['a']} | {d['b']}]", d["distance"], tol.distinct, "gt")
        rep.details["triples"] = reports
        rep.details["distances"] = dists
    _orders(rows, [k for k in rows[0] if k != "h"])
    rep.convergence = rows
    return rep


# -- deformation --------------------------------------------------------------------


LIFTED_ITEMS = ("i_leaf_psi", "iii_leaf_parallel", "iii_commutes", "iv_codazzi", "v_ricci", "vi_dpsi_leaf", "vii_dpsi")


def _chain_checks(rep, label, stages, tol, bar):
    if "failure" in stages:
        f = stages["failure"]
        rep.flag(f"[{label}] stage {f['stage']}", False, f["message"])
        return
    t = stages["triple"]
    _triple_checks(rep, label, t, tol)
    L = stages["lifted"]
    for key in LIFTED_ITEMS:
        if key in L:
            rep.check(f"[{label}] lifted ({key})", L[key]["max"], L["threshold"])
    rep.check(f"[{label}] lifted (ii) det", L["ii_det"]["max"], tol.algebraic)
    rep.check(f"[{label}] lifted (viii) margin", L["viii_not_pm"]["min"], tol.margin_floor, "gt")
    rep.check(f"[{label}] lifted (ix) margin", L["ix_rank"]["min"], tol.margin_floor, "gt")
    g = stages["genuineness"]
    rep.check(f"[{label}] genuineness not +-", g["not_plus_minus"]["min"], tol.margin_floor, "gt")
    rep.check(f"[{label}] genuineness rank two", g["rank_two"]["min"], tol.margin_floor, "gt")
    if "structure" in stages:
        s = stages["structure"]
        rep.check(f"[{label}] Gauss-Codazzi-Ricci", s["max"], s["threshold"])
        i = stages["integrate"]
        rep.check(f"[{label}] path mismatch", i["path_mismatch_max"], i["threshold"])
        rep.check(f"[{label}] |<F,F>|", i["lightcone_max"], tol.lightcone)
        rep.check(f"[{label}] isometry (frame)", i["isometry_frame_max"], i["threshold"])
        rep.check(f"[{label}] isometry (finite differences)", i["isometry_fd_max"], i["threshold"])
        p = stages["project"]
        rep.check(f"[{label}] conformality (finite differences)", p["conformality_fd_max"], p["threshold"])
        rep.check(f"[{label}] conformality (frame)", p["conformality_frame_max"], p["threshold"])


def _conv_row(h, stages):
    row = {"h": h}
    if "lifted" in stages:
        for key in LIFTED_ITEMS:
            if key in stages["lifted"]:
                row[key] = stages["lifted"][key]["max"]
    if "integrate" in stages:
        row["path_mismatch"] = stages["integrate"]["path_mismatch_max"]
        row["conformality_fd"] = stages["project"]["conformality_fd_max"]
    return row


def _emit_deformation(rep, emit, label, objs, cfg):
    R = objs["deformation"]
    B = objs["bundle"]
    chart = R.chart
    names = ["u", "v"] + [f"t{k}" for k in range(1, chart.ndim - 1)]
    tag = slug(label)
    files = {
        "position": (f"deform_{tag}_position.csv", R.frame[..., 0, :]),
        "F": (f"deform_{tag}_F.csv", R.F),
        "f": (f"deform_{tag}_f.csv", R.f),
        "phi": (f"deform_{tag}_phi.csv", R.conformal_factor),
        "G": (f"deform_{tag}_metric.csv", B.G),
    }
    for key, (name, arr) in files.items():
        write_grid_csv(emit / name, arr, chart, names, {"field": key, "candidate": label})
        rep.files[name] = {"field": key, "candidate": label}
    i, p = R.report, R.report["projection"]
    rep.rechecks.append(
        {
            "kind": "deformation",
            "candidate": label,
            "files": {k: v[0] for k, v in files.items()},
            "margin": cfg.surface_margin,
            "lightcone_max": i["lightcone_max"],
            "isometry_fd_max": i["isometry_fd_max"],
            "conformality_fd_max": p["conformality_fd_max"],
            "lightcone_tol": cfg.tolerances.lightcone,
            "disc_const": cfg.tolerances.disc_const,
            "ok": bool(
                i["lightcone_max"] <= cfg.tolerances.lightcone
                and i["isometry_fd_max"] <= i["threshold"]
                and p["conformality_fd_max"] <= p["threshold"]
            ),
        }
    )


def _pick_member(cfg):
    cands = candidates_from(cfg)
    if cfg.candidate is not None:
        for c, e in cands:
            if c.label == cfg.candidate:
                return c, e
        raise UsageError(f"no candidate labelled {cfg.candidate!r}")
    for c, e in cands:
        if e == "member":
            return c, e
    raise UsageError("deform needs a candidate expected to be a member")


def _geometry_checks(rep, M):
    e = M.reports["envelope"]
    rep.check("envelope incidence", e["incidence_max"], M.cfg.tolerances.algebraic)
    rep.check("envelope tangency", e["tangency_max"], e["threshold"])
    s = M.reports["splitting"]
    rep.flag("splitting tensor not in span{I}", not s["surface_like"], f"residual {s['span_I_residual_max']:.3e}")
    rep.details["geometry"] = M.reports


def _run_geometry(rep, cfg, j):
    try:
        return m_geometry(cfg, j)
    except GeometryError as exc:
        rep.flag(f"stage {exc.stage or 'geometry'}", False, str(exc))
        return None


def cmd_deform(cfg, out, refine=0, emit_csv=False):
    rep = Report("deform", cfg, refine)
    emit = out / "deform" if emit_csv else None
    tol = cfg.tolerances
    cand, expect = _pick_member(cfg)
    rows = []
    for j in range(refine + 1):
        M = _run_geometry(rep, cfg, j)
        if M is None:
            break
        stages, objs = member_chain(cand, M, deform=True)
        rows.append(_conv_row(M.h, stages))
        if j == 0:
            _geometry_checks(rep, M)
            rep.details["candidate"] = cand.label
            rep.details["stages"] = stages
            if expect == "non-member":
                rep.flag(f"[{cand.label}] refused at membership", chain_ok(stages, expect))
            else:
                _chain_checks(rep, cand.label, stages, tol, tol.disc(M.h))
                if emit is not None and "deformation" in objs:
                    _emit_deformation(rep, emit, cand.label, objs, cfg)
    if rows:
        _orders(rows, [k for k in rows[0] if k != "h"])
    rep.convergence = rows
    return rep


def cmd_pipeline(cfg, out, refine=0, emit_csv=False):
    rep = Report("pipeline", cfg, refine)
    emit = out / "pipeline" if emit_csv else None
    tol = cfg.tolerances
    M = _run_geometry(rep, cfg, 0)
    if M is None:
        return rep
    _geometry_checks(rep, M)
    triples = {}
    rep.details["candidates"] = {}
    for cand, expect in candidates_from(cfg):
        stages, objs = member_chain(cand, M, deform=True)
        rep.details["candidates"][cand.label] = {"expect": expect, "stages": stages}
        if expect == "non-member":
            rep.flag(f"[{cand.label}] refused at membership", chain_ok(stages, expect), stages.get("failure", {}).get("message", ""))
            continue
        _chain_checks(rep, cand.label, stages, tol, tol.disc(M.h))
        if "triple" in objs:
            triples[cand.label] = objs["triple"]
        if emit is not None and "deformation" in objs:
            _emit_deformation(rep, emit, cand.label, objs, cfg)
    dists = pairwise_distances(triples, cfg.surface_margin)
    for d in dists:
        rep.check(f"distance[{d['a']} | {d['b']}]", d["distance"], tol.distinct, "gt")
    rep.details["distances"] = dists
    if refine:
        rows = []
        label = next(iter(triples), None)
        if label is not None:
            cand = next(c for c, _ in candidates_from(cfg) if c.label == label)
            for j in range(refine + 1):
                Mj = M if j == 0 else m_geometry(cfg, j)
                stages, _ = member_chain(cand, Mj, deform=True)
                rows.append(_conv_row(Mj.h, stages))
            _orders(rows, [k for k in rows[0] if k != "h"])
        rep.convergence = rows
    return rep


# -- verify ---------------------------------------------------------------------------


def _close(a, b):
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


class _GridSurface:
    """Just enough of a SurfaceChart to rerun the surface checks on CSV data."""

    def __init__(self, chart, fd_order=2, **fields):
        self.chart = chart
        self.fd_order = fd_order
        self.__dict__.update(fields)

    @property
    def h(self):
        return self.chart.h


def _recheck(entry, root):
    from .deformation import conformality_residual, isometry_residual
    from .io import read_grid_csv
    from .lorentz import minkowski_dot
    from .surface import interior, q_operator
    from .triple import bar_triple_from_arrays
    from .config import Tolerances

    files = {k: root / v for k, v in entry["files"].items()}
    kind = entry["kind"]
    got = {}
    if kind == "christoffel":
        surf, chart, _ = read_grid_csv(files["surface"])
        ut = chart.axis(0)
        got["gamma1_max"] = float(np.abs(interior(surf[..., 0])).max())
        got["gamma2_error"] = float(np.abs(interior(surf[..., 1] + np.tanh(ut)[:, None])).max())
        return got, None
    if kind == "membership":
        rho, chart, _ = read_grid_csv(files["rho"])
        surf, _, _ = read_grid_csv(files["surface"])
        S = _GridSurface(chart, gamma1=surf[..., 0], gamma2=surf[..., 1], F=surf[..., 2])
        m = entry["margin"]
        got["residual"] = float(np.abs(interior(q_operator(rho, S), m)).max())
        member = got["residual"] <= entry["disc_const"] * chart.h**2 * float(np.abs(rho).max())
        return got, ("member", member)
    if kind == "triple":
        tri, chart, _ = read_grid_csv(files["triple"])
        geo, _, _ = read_grid_csv(files["geometry"])
        shape = chart.shape
        S = _GridSurface(
            chart,
            entry["fd_order"],
            metric=geo[..., :4].reshape(shape + (2, 2)),
            christoffel=geo[..., 4:].reshape(shape + (2, 2, 2)),
        )
        T = bar_triple_from_arrays(tri[..., :4].reshape(shape + (2, 2)), tri[..., 4:8].reshape(shape + (2, 2)), tri[..., 8:])
        r = verify_bar_conditions(T, S, Tolerances(disc_const=entry["disc_const"]), entry["margin"])
        got = {"a_det": r["a_det"]["max"], "b_codazzi": r["b_codazzi"]["max"], "c_dpsi": r["c_dpsi"]["max"], "d_not_pm": r["d_not_pm"]["min"], "e_rank": r["e_rank"]["min"]}
        return got, ("ok", bool(r["b_codazzi"]["ok"] and r["c_dpsi"]["ok"] and r["d_not_pm"]["ok"] and r["e_rank"]["ok"]))
    if kind == "deformation":
        pos, chart, _ = read_grid_csv(files["position"])
        F, _, _ = read_grid_csv(files["F"])
        f, _, _ = read_grid_csv(files["f"])
        phi, _, _ = read_grid_csv(files["phi"])
        G, _, _ = read_grid_csv(files["G"])
        m = entry["margin"]
        got["lightcone_max"] = float(np.abs(minkowski_dot(F, F)).max())
        got["isometry_fd_max"] = isometry_residual(pos, chart, G, m)
        got["conformality_fd_max"] = conformality_residual(f, chart, G, phi, m)
        bar = entry["disc_const"] * chart.h**2
        ok = got["lightcone_max"] <= entry["lightcone_tol"] and got["isometry_fd_max"] <= bar and got["conformality_fd_max"] <= bar
        return got, ("ok", ok)
    raise UsageError(f"unknown recheck kind {kind!r}")


def cmd_verify(out):
    """Recompute every emitted residual from CSV and compare with the summaries."""
    manifests = sorted(p for p in out.glob("*.json") if p.name != "verify.json")
    if not manifests:
        raise UsageError(f"no run summaries in {out}")
    result = {"command": "verify", "summaries": [], "checks": []}
    ok = True
    for path in manifests:
        data = read_json(path)
        if "rechecks" not in data:
            continue
        result["summaries"].append(path.name)
        if not data["rechecks"]:
            result["checks"].append({"summary": path.name, "note": "no CSV emitted", "ok": False})
            ok = False
        for entry in data["rechecks"]:
            got, verdict = _recheck(entry, out / data["command"])
            for key, value in got.items():
                same = _close(value, entry[key])
                result["checks"].append({"summary": path.name, "kind": entry["kind"], "candidate": entry.get("candidate"), "quantity": key, "recorded": entry[key], "recomputed": value, "ok": same})
                ok &= same
            if verdict is not None:
                name, value = verdict
                expected = entry["member"] if name == "member" else entry["ok"]
                agree = bool(value) == bool(expected)
                result["checks"].append({"summary": path.name, "kind": entry["kind"], "candidate": entry.get("candidate"), "quantity": f"verdict {name}", "recorded": expected, "recomputed": bool(value), "ok": agree})
                ok &= agree
    result["verdict"] = "pass" if ok else "fail"
    return result, ok


# -- entry point ------------------------------------------------------------------------


COMMANDS = {
    "gallery": cmd_gallery,
    "cs-check": cmd_cs_check,
    "triple": cmd_triple,
    "deform": cmd_deform,
    "pipeline": cmd_pipeline,
}


def build_parser():
    p = _Parser(prog="confdef", description="Conformal deformations of hypersurfaces in codimension two.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in list(COMMANDS) + ["verify"]:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON run configuration")
        s.add_argument("--out", type=Path, default=Path("confdef-out"), help="output directory")
        if name != "verify":
            s.add_argument("--refine", type=int, default=0, help="extra halvings of h for a convergence table")
            s.add_argument("--emit-csv", action="store_true", help="write raw grids as CSV")
            s.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    return p


def load_config(path, tol_scale=1.0):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = RunConfig.from_dict(data)
        return cfg.with_tol_scale(tol_scale) if tol_scale != 1.0 else cfg
    except (ValueError, GeometryError) as exc:
        raise UsageError(str(exc)) from exc


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        out = args.out
        if args.command == "verify":
            result, ok = cmd_verify(out)
            write_json(out / "verify.json", result)
            for c in result["checks"]:
                print(f"  {'ok  ' if c['ok'] else 'FAIL'} {c.get('summary')} {c.get('candidate') or ''} {c.get('quantity', c.get('note'))}")
            print(f"verify: {'PASS' if ok else 'FAIL'}")
            return EXIT_PASS if ok else EXIT_FAIL
        if args.refine < 0:
            raise UsageError("--refine must be non-negative")
        cfg = load_config(args.config, args.tol_scale)
        start = time.perf_counter()
        rep = COMMANDS[args.command](cfg, out, args.refine, args.emit_csv)
        write_json(out / f"{args.command}.json", rep.to_dict())
        print(rep.table())
        print(f"({time.perf_counter() - start:.1f} s, summary in {out / (args.command + '.json')})")
        return EXIT_PASS if rep.ok else EXIT_FAIL
    except UsageError as exc:
        print(f"confdef: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"confdef: IO error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
