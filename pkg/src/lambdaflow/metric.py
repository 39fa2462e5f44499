"""Phase-space and curve primitives.

Curves are sampled on a strictly increasing time grid starting at 0 and are
piecewise linear in coordinates between nodes.  Maps of time (reparametrizations,
arc length) are sampled the same way.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DomainError

__all__ = [
    "MetricSpace",
    "RangeSample",
    "SampledCurve",
    "TimeReparam",
    "arc_length",
    "as_point",
    "check_one_lipschitz",
    "constant_curve",
    "curve_distance",
    "interp",
    "lipschitz_defect",
    "merge_grids",
    "metric_speed",
    "monotone_inverse",
    "range_sample",
    "resample",
    "rho",
    "t_star",
]

# relative slack used when snapping nearly coincident grid nodes
GRID_SNAP = 1e-12


def as_point(x, dim=None):
    p = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if p.ndim != 1:
        raise DomainError(f"a point must be a vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError("point has non-finite coordinates")
    if dim is not None and p.shape[0] != dim:
        raise DomainError(f"expected a point of dimension {dim}, got {p.shape[0]}")
    return p


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MetricSpace:
    """Euclidean ``R^dim``."""

    dim: int = 1

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DomainError("dimension must be positive")

    def distance(self, p, q):
        """Distance between points, broadcasting over leading axes."""
        diff = np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)
        return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """A trajectory sampled at ``times`` with one point per node.

    Parameters
    ----------
    times : array_like, shape (n,)
        Strictly increasing, ``times[0] == 0``, ``n >= 2``.
    points : array_like, shape (n, d) or (n,)
        Positions; a 1-D array is read as a curve in ``R``.
    """

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim == 1:
            p = p[:, None]
        if t.ndim != 1 or p.ndim != 2 or p.shape[0] != t.shape[0]:
            raise DomainError(f"times {t.shape} and points {p.shape} do not match")
        if t.shape[0] < 2:
            raise DomainError("a curve needs at least two nodes")
        if t[0] != 0.0:
            raise DomainError("curve time grid must start at 0")
        if not np.all(np.diff(t) > 0.0):
            raise DomainError("curve time grid must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise DomainError("curve contains non-finite values")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "points", _frozen(p))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def horizon(self):
        return float(self.times[-1])

    def __len__(self):
        return self.times.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SampledCurve):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TimeReparam:
    """A sampled map of time ``z`` with ``z(grid[0]) = z(0) = 0``.

    Monotonicity and the 1-Lipschitz bound are not enforced here; see
    :func:`check_one_lipschitz`.  Arc-length maps are stored in this container
    although their slope may exceed one.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if g.ndim != 1 or g.shape != v.shape or g.shape[0] < 1:
            raise DomainError(f"grid {g.shape} and values {v.shape} do not match")
        if g[0] != 0.0 or v[0] != 0.0:
            raise DomainError("a reparametrization must satisfy z(0) = 0")
        if g.shape[0] > 1 and not np.all(np.diff(g) > 0.0):
            raise DomainError("reparametrization grid must be strictly increasing")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
            raise DomainError("reparametrization contains non-finite values")
        object.__setattr__(self, "grid", _frozen(g))
        object.__setattr__(self, "values", _frozen(v))

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)

    def __eq__(self, other):
        if not isinstance(other, TimeReparam):
            return NotImplemented
        return np.array_equal(self.grid, other.grid) and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class RangeSample:
    """Visited range in traversal order plus the closure point, if any."""

    trace: np.ndarray
    limit: Optional[np.ndarray] = None


def constant_curve(point, horizon=1.0, n=2):
    p = as_point(point)
    times = np.linspace(0.0, float(horizon), int(n))
    return SampledCurve(times, np.repeat(p[None, :], times.shape[0], axis=0))


def interp(c: SampledCurve, t):
    """Position of ``c`` at time(s) ``t``; no extension past the horizon."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > c.horizon):
        raise DomainError(f"time {t} outside [0, {c.horizon}]")
    flat = np.atleast_1d(t_arr)
    out = np.empty((flat.shape[0], c.dim))
    for k in range(c.dim):
        out[:, k] = np.interp(flat, c.times, c.points[:, k])
    return out[0] if t_arr.ndim == 0 else out


def resample(c: SampledCurve, grid, extend=False):
    """Evaluate ``c`` on ``grid``; with ``extend`` the last point is held past the horizon."""
    grid = np.asarray(grid, dtype=np.float64)
    if not extend:
        return SampledCurve(grid, interp(c, grid))
    pts = np.empty((grid.shape[0], c.dim))
    for k in range(c.dim):
        pts[:, k] = np.interp(grid, c.times, c.points[:, k])
    return SampledCurve(grid, pts)


def merge_grids(*grids, snap=GRID_SNAP):
    """Union of time grids with nodes closer than ``snap * scale`` merged."""
    allg = np.unique(np.concatenate([np.asarray(g, dtype=np.float64) for g in grids]))
    if allg.shape[0] < 2:
        return allg
    scale = max(1.0, float(allg[-1]))
    keep = np.concatenate([[True], np.diff(allg) > snap * scale])
    return allg[keep]


def metric_speed(c: SampledCurve, space: Optional[MetricSpace] = None):
    """Chord speed on each grid interval, the sampled metric derivative."""
    space = space or MetricSpace(c.dim)
    return space.distance(c.points[1:], c.points[:-1]) / np.diff(c.times)


def arc_length(c: SampledCurve, space: Optional[MetricSpace] = None):
    space = space or MetricSpace(c.dim)
    chords = space.distance(c.points[1:], c.points[:-1])
    return TimeReparam(c.times, np.concatenate([[0.0], np.cumsum(chords)]))


def t_star(c: SampledCurve, space: Optional[MetricSpace] = None, eps_d=1e-6):
    """Freeze time: first grid time after which ``c`` stays within ``eps_d``.

    Returns the horizon when the curve is still moving at its last node.
    """
    k = kernels.freeze_index(c.points, eps_d)
    return float(c.times[k])


def rho(c: SampledCurve, space: Optional[MetricSpace] = None, eps_d=1e-6):
    """Freeze time of a truncated curve; same computation as :func:`t_star`."""
    return t_star(c, space, eps_d)


def monotone_inverse(m: TimeReparam, query):
    """Left-most time ``t`` with ``m(t) >= query``, interpolating linearly."""
    q = float(query)
    v = m.values
    if q < v[0] or q > v[-1]:
        raise DomainError(f"query {q} outside [{v[0]}, {v[-1]}]")
    i = int(np.searchsorted(v, q, side="left"))
    if i == 0:
        return float(m.grid[0])
    lo, hi = v[i - 1], v[i]
    frac = (q - lo) / (hi - lo)
    return float(m.grid[i - 1] + frac * (m.grid[i] - m.grid[i - 1]))


def check_one_lipschitz(m: TimeReparam, tol=0.0):
    """True iff every consecutive increment lies in ``[-tol, dt + tol]``."""
    inc = np.diff(m.values)
    dt = np.diff(m.grid)
    return bool(np.all(inc >= -tol) and np.all(inc <= dt + tol))


def lipschitz_defect(m: TimeReparam):
    """Worst violation over all pairs ``s <= t`` of ``0 <= z(t) - z(s) <= t - s``.

    Returns ``(decrease, excess)``: the largest drop of ``z`` and the largest
    amount by which ``z(t) - z(s)`` exceeds ``t - s``.
    """
    drop, _, _ = kernels.max_rise(-m.values)
    excess, _, _ = kernels.max_rise(m.values - m.grid)
    return drop, excess


def range_sample(c: SampledCurve, space: Optional[MetricSpace] = None, eps_d=1e-6):
    """Nodes of ``c`` with consecutive ``eps_d``-duplicates removed.

    The final node is reported as ``limit`` when the curve is frozen before its
    horizon; otherwise it still serves as the closure point of the sampled range.
    """
    space = space or MetricSpace(c.dim)
    pts = c.points
    keep = [0]
    for i in range(1, pts.shape[0]):
        if space.distance(pts[i], pts[keep[-1]]) > eps_d:
            keep.append(i)
    frozen = t_star(c, space, eps_d) < c.horizon
    return RangeSample(trace=pts[keep].copy(), limit=pts[-1].copy() if frozen else None)


def curve_distance(a: SampledCurve, b: SampledCurve):
    """Sup distance over the merged grid, holding each curve's last point."""
    grid = merge_grids(a.times, b.times)
    pa = resample(a, grid, extend=True).points
    pb = resample(b, grid, extend=True).points
    return float(np.max(np.linalg.norm(pa - pb, axis=1)))
