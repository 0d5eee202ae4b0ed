"""Uniform tensor-product grids, finite-difference jets and line transport.

Fields live on arrays whose leading axes are the grid axes; any trailing
axes are components.  Axis 0 is u, axis 1 is v, further axes are leaf
coordinates of a hypersurface chart.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GeometryError

MIN_SAMPLES = 5


@dataclass(frozen=True)
class GridChart:
    starts: tuple
    spacings: tuple
    counts: tuple
    strict: bool = True

    def __post_init__(self):
        if not (len(self.starts) == len(self.spacings) == len(self.counts)):
            raise GeometryError("grid axes have inconsistent lengths")
        if self.strict and min(self.counts) < MIN_SAMPLES:
            raise GeometryError(f"grid too small: every axis needs at least {MIN_SAMPLES} samples, got {self.counts}")
        if min(self.spacings) <= 0:
            raise GeometryError("grid spacings must be positive")

    @classmethod
    def from_ranges(cls, ranges, counts, strict=True):
        """ranges: sequence of (lo, hi); counts: samples per axis (endpoints included)."""
        starts = tuple(float(lo) for lo, _ in ranges)
        spacings = tuple((hi - lo) / (c - 1) for (lo, hi), c in zip(ranges, counts))
        return cls(starts, spacings, tuple(int(c) for c in counts), strict)

    @classmethod
    def centered(cls, centers, spacings, counts, strict=True):
        starts = tuple(c - h * (k - 1) / 2 for c, h, k in zip(centers, spacings, counts))
        return cls(starts, tuple(float(h) for h in spacings), tuple(int(k) for k in counts), strict)

    @property
    def ndim(self):
        return len(self.counts)

    @property
    def shape(self):
        return tuple(self.counts)

    @property
    def h(self):
        return max(self.spacings)

    def axis(self, k):
        return self.starts[k] + self.spacings[k] * np.arange(self.counts[k])

    def mesh(self):
        return np.meshgrid(*[self.axis(k) for k in range(self.ndim)], indexing="ij")

    def nearest_index(self, k, value):
        return int(np.clip(round((value - self.starts[k]) / self.spacings[k]), 0, self.counts[k] - 1))

    def crop(self, axes, depth):
        """Chart obtained by dropping ``depth`` samples at both ends of ``axes``."""
        starts = list(self.starts)
        counts = list(self.counts)
        for a in axes:
            starts[a] += depth * self.spacings[a]
            counts[a] -= 2 * depth
            if counts[a] < 1:
                raise GeometryError(f"axis {a} has no samples left after cropping by {depth}")
        return GridChart(tuple(starts), self.spacings, tuple(counts), strict=False)

    def to_dict(self):
        return {"starts": list(self.starts), "spacings": list(self.spacings), "counts": list(self.counts), "strict": self.strict}

    @classmethod
    def from_dict(cls, data):
        return cls(
            tuple(float(x) for x in data["starts"]),
            tuple(float(x) for x in data["spacings"]),
            tuple(int(c) for c in data["counts"]),
            bool(data.get("strict", True)),
        )


def crop(field, axes, depth):
    """Drop ``depth`` samples from both ends of each grid axis in ``axes``."""
    if depth == 0 or not axes:
        return field
    index = [slice(None)] * field.ndim
    for a in axes:
        index[a] = slice(depth, field.shape[a] - depth)
    return field[tuple(index)]


def d1(field, axis, h, order=2):
    """First derivative: central inside, one-sided at the ends, of the given order (2 or 4)."""
    if order == 4:
        return _d1_fourth(field, axis, h)
    if field.shape[axis] < 3:
        raise GeometryError(f"grid too small for a derivative along axis {axis}")
    return np.gradient(field, h, axis=axis, edge_order=2)


def _d1_fourth(field, axis, h):
    if field.shape[axis] < 5:
        raise GeometryError(f"grid too small for a fourth-order derivative along axis {axis}")
    f = np.moveaxis(field, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    out[-1] = -(-25.0 * f[-1] + 48.0 * f[-2] - 36.0 * f[-3] + 16.0 * f[-4] - 3.0 * f[-5]) / (12.0 * h)
    out[-2] = -(-3.0 * f[-1] - 10.0 * f[-2] + 18.0 * f[-3] - 6.0 * f[-4] + f[-5]) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


def d2(field, axis, h, order=2):
    """Pure second derivative; compact three-point stencil or the fourth-order five-point one."""
    n = field.shape[axis]
    f = np.moveaxis(field, axis, 0)
    out = np.empty_like(f)
    if order == 4:
        if n < 6:
            raise GeometryError(f"grid too small for a fourth-order second derivative along axis {axis}")
        out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (12.0 * h * h)
        for i, g in ((0, f), (-1, f[::-1])):
            out[i] = (45.0 * g[0] - 154.0 * g[1] + 214.0 * g[2] - 156.0 * g[3] + 61.0 * g[4] - 10.0 * g[5]) / (12.0 * h * h)
        for i, g in ((1, f), (-2, f[::-1])):
            out[i] = (10.0 * g[0] - 15.0 * g[1] - 4.0 * g[2] + 14.0 * g[3] - 6.0 * g[4] + g[5]) / (12.0 * h * h)
        return np.moveaxis(out, 0, axis)
    if n < 4:
        raise GeometryError(f"grid too small for a second derivative along axis {axis}")
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


def d11(field, a, b, ha, hb, order_a=2, order_b=2):
    if a == b:
        return d2(field, a, ha, order_a)
    return d1(d1(field, a, ha, order_a), b, hb, order_b)


def jets(field, chart, order=2):
    """All first (and second) partial derivatives of a chart-sampled field."""
    if order not in (1, 2):
        raise GeometryError("jets: order must be 1 or 2")
    h = chart.spacings
    first = [d1(field, k, h[k]) for k in range(chart.ndim)]
    out = {"d1": first}
    if order == 2:
        out["d2"] = {
            (a, b): d11(field, a, b, h[a], h[b]) for a in range(chart.ndim) for b in range(a, chart.ndim)
        }
    return out


def line_spline(values, h, axis):
    x = h * np.arange(values.shape[axis])
    return CubicSpline(x, values, axis=axis)


def midpoints(values, h, axis):
    """Cubic-spline values halfway between consecutive samples along ``axis``."""
    n = values.shape[axis]
    spline = line_spline(values, h, axis)
    return spline(h * (np.arange(n - 1) + 0.5))


def rk4_linear(k_nodes, k_mid, y0, h):
    """Integrate dy/dx = K(x) y along axis 0 of ``k_nodes``.

    k_nodes: (N, ..., d, d) coefficients at the samples; k_mid: (N-1, ..., d, d)
    at the half steps; y0: (..., d, q).  A negative ``h`` integrates backwards
    through arrays that the caller has already reversed.
    """
    out = np.empty((k_nodes.shape[0],) + np.shape(y0), dtype=np.result_type(k_nodes, y0))
    y = np.asarray(y0)
    out[0] = y
    for i in range(k_nodes.shape[0] - 1):
        a1 = k_nodes[i] @ y
        a2 = k_mid[i] @ (y + 0.5 * h * a1)
        a3 = k_mid[i] @ (y + 0.5 * h * a2)
        a4 = k_nodes[i + 1] @ (y + h * a3)
        y = y + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        out[i + 1] = y
    return out


def transport_from_seed(k_nodes, k_mid, y_seed, h, seed):
    """Integrate forwards and backwards from sample ``seed`` along axis 0."""
    n = k_nodes.shape[0]
    out = np.empty((n,) + np.shape(y_seed), dtype=np.result_type(k_nodes, y_seed))
    fwd = rk4_linear(k_nodes[seed:], k_mid[seed:], y_seed, h)
    out[seed:] = fwd
    if seed > 0:
        back = rk4_linear(k_nodes[seed::-1], k_mid[seed - 1 :: -1] if seed > 0 else k_mid[:0], y_seed, -h)
        out[: seed + 1] = back[::-1]
    return out
