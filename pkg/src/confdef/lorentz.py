"""Minkowski space with signature (-,+,...,+) and the light-cone model.

Vectors are plain numpy arrays whose last axis holds the coordinates, with
coordinate 0 time-like.  Every function broadcasts over leading axes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, first_bad_index


def minkowski_dot(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise GeometryError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.einsum("...i,...i->...", a[..., 1:], b[..., 1:]) - a[..., 0] * b[..., 0]


def metric_signature(dim):
    eta = np.ones(dim)
    eta[0] = -1.0
    return eta


@dataclass(frozen=True)
class LightConeModel:
    """The slice {p : <p,p> = 0, <p,w> = 1} as an isometric copy of R^m.

    ``C`` has shape (m+2, m); its columns span span{p0, w}^perp.
    """

    p0: np.ndarray
    w: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        tol = 1e-12
        p0, w, C = self.p0, self.w, self.C
        if C.shape != (p0.shape[0], p0.shape[0] - 2) or w.shape != p0.shape:
            raise GeometryError("light-cone model has inconsistent shapes")
        checks = {
            "<p0,p0>": minkowski_dot(p0, p0),
            "<w,w>": minkowski_dot(w, w),
            "<p0,w>-1": minkowski_dot(p0, w) - 1.0,
        }
        for name, value in checks.items():
            if abs(value) > tol:
                raise GeometryError(f"light-cone model invariant {name} = {value:.3e}")
        gram = np.einsum("ia,i,ib->ab", C, metric_signature(p0.shape[0]), C)
        if np.max(np.abs(gram - np.eye(C.shape[1]))) > tol:
            raise GeometryError("columns of C are not orthonormal")
        if np.max(np.abs(minkowski_dot(C.T, p0))) > tol or np.max(np.abs(minkowski_dot(C.T, w))) > tol:
            raise GeometryError("columns of C are not orthogonal to p0 and w")

    @property
    def m(self):
        return self.C.shape[1]

    @property
    def dim(self):
        return self.p0.shape[0]

    @classmethod
    def canonical(cls, m):
        """p0 = (1,1,0..)/sqrt2, w = (-1,1,0..)/sqrt2, C onto coordinates 2..m+1."""
        r = 1.0 / np.sqrt(2.0)
        p0 = np.zeros(m + 2)
        w = np.zeros(m + 2)
        p0[:2] = (r, r)
        w[:2] = (-r, r)
        C = np.zeros((m + 2, m))
        C[2:, :] = np.eye(m)
        return cls(p0, w, C)

    def to_dict(self):
        return {"p0": self.p0.tolist(), "w": self.w.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["p0"], float), np.asarray(data["w"], float), np.asarray(data["C"], float))


def psi_embed(x, model):
    """Psi(x) = p0 + C x - |x|^2 w / 2."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.m:
        raise GeometryError(f"point dimension {x.shape[-1]} does not match model dimension {model.m}")
    sq = np.einsum("...i,...i->...", x, x)
    return model.p0 + x @ model.C.T - 0.5 * sq[..., None] * model.w


def psi_push(x, v, model):
    """Differential of Psi at x applied to the Euclidean vector v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    xv = np.einsum("...i,...i->...", x, v)
    return v @ model.C.T - xv[..., None] * model.w


def euclidean_coords(p, model):
    """Coordinates <p, C_i>; inverts Psi on the slice <p,w> = 1."""
    eta = metric_signature(model.dim)
    return np.asarray(p, dtype=float) @ (eta[:, None] * model.C)


def psi_project(u, model, tol=1e-12):
    """Pi(u) = u / <u,w>."""
    u = np.asarray(u, dtype=float)
    uw = minkowski_dot(u, model.w)
    bad = np.abs(uw) <= tol
    if np.any(bad):
        raise GeometryError("point on forbidden ray Rw", index=first_bad_index(bad))
    return u / np.asarray(uw)[..., None]


def lift_conformal(f, factor, model):
    """Isometric light-cone representative (1/phi) Psi(f)."""
    factor = np.asarray(factor, dtype=float)
    bad = ~(factor > 0)
    if np.any(bad):
        raise GeometryError("conformal factor must be positive", index=first_bad_index(bad))
    return psi_embed(f, model) / factor[..., None]


def drop_isometric(F, model):
    """Inverse of lift_conformal: returns (f, phi) with phi = 1/<F,w>."""
    F = np.asarray(F, dtype=float)
    Fw = minkowski_dot(F, model.w)
    bad = ~(Fw > 0)
    if np.any(bad):
        raise GeometryError("sample with <F,w> <= 0", index=first_bad_index(bad))
    f = euclidean_coords(F / Fw[..., None], model)
    return f, 1.0 / Fw
