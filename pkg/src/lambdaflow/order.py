"""Solution algebra, the reparametrization order and minimal solutions.

``u`` precedes ``v`` when ``u = v o z`` for an increasing 1-Lipschitz ``z`` with
``z(0) = 0`` and the range of ``v`` lies in the closure of the range of ``u``:
``u`` is ``v`` slowed down.  The minimal solution of a range deletes every
stretch of time spent where ``g`` vanishes.
"""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .dissipation import is_solution, sug_check
from .errors import ConcatenationGapError, DomainError, NotASolutionError, PreconditionError
from .metric import (
    GRID_SNAP,
    MetricSpace,
    SampledCurve,
    TimeReparam,
    check_one_lipschitz,
    interp,
    lipschitz_defect,
    merge_grids,
    metric_speed,
    resample,
    t_star,
)
from .problems import FlowProblem

__all__ = [
    "NonReturnReport",
    "MinimalityReport",
    "PsiReport",
    "cantor_time_change",
    "check_non_return",
    "concatenate",
    "critical_time_measure",
    "extract_minimal",
    "is_minimal",
    "match_reparam",
    "min_separation",
    "precedes",
    "psi_compare",
    "ranges_match",
    "restrict",
    "singular_dilate",
    "translate",
    "truncate",
]

SUG_CAVEAT = "criterion assumes strong upper gradient"


def _space(c, space):
    return space or MetricSpace(c.dim)


def _node_index(times, t):
    """Index of the node equal to ``t`` up to grid snapping, or ``None``."""
    k = int(np.searchsorted(times, t))
    slack = GRID_SNAP * max(1.0, float(times[-1]))
    for j in (k - 1, k):
        if 0 <= j < times.shape[0] and abs(times[j] - t) <= slack:
            return j
    return None


def _with_node(c: SampledCurve, t):
    """``(curve, index)`` with ``t`` present as a node of the curve."""
    k = _node_index(c.times, t)
    if k is not None:
        return c, k
    k = int(np.searchsorted(c.times, t))
    times = np.insert(c.times, k, t)
    points = np.insert(c.points, k, interp(c, t), axis=0)
    return SampledCurve(times, points), k


# ---------------------------------------------------------------------------
# solution algebra


def translate(c: SampledCurve, tau):
    """``t -> c(t + tau)`` on ``[0, horizon - tau]``."""
    tau = float(tau)
    if tau < 0 or tau >= c.horizon:
        raise DomainError(f"shift {tau} outside [0, {c.horizon})")
    if tau == 0.0:
        return c
    c, k = _with_node(c, tau)
    return SampledCurve(c.times[k:] - c.times[k], c.points[k:])


def concatenate(u: SampledCurve, v: SampledCurve, t_bar, space: Optional[MetricSpace] = None, eps_d=1e-6):
    """``u`` on ``[0, t_bar]`` followed by ``v(. - t_bar)``."""
    t_bar = float(t_bar)
    if t_bar < 0 or t_bar > u.horizon + GRID_SNAP * max(1.0, u.horizon):
        raise DomainError(f"junction {t_bar} outside [0, {u.horizon}]")
    t_bar = min(t_bar, u.horizon)
    u, k = _with_node(u, t_bar)
    gap = float(_space(u, space).distance(u.points[k], v.points[0]))
    if gap > eps_d:
        raise ConcatenationGapError(f"concatenation gap {gap:.3g} exceeds eps_d = {eps_d:g}")
    times = np.concatenate([u.times[: k + 1], u.times[k] + v.times[1:]])
    points = np.concatenate([u.points[: k + 1], v.points[1:]])
    return SampledCurve(times, points)


def restrict(c: SampledCurve, T):
    """``c`` on ``[0, T]``; ``T`` becomes the last node."""
    T = float(T)
    if T <= 0 or T > c.horizon:
        raise DomainError(f"restriction time {T} outside (0, {c.horizon}]")
    c, k = _with_node(c, T)
    return SampledCurve(c.times[: k + 1], c.points[: k + 1])


def truncate(c: SampledCurve, T):
    """``t -> c(min(t, T))``; ``T`` becomes a node if it is not one already."""
    T = float(T)
    if T < 0 or T > c.horizon:
        raise DomainError(f"truncation time {T} outside [0, {c.horizon}]")
    c, k = _with_node(c, T)
    pts = c.points.copy()
    pts[k + 1:] = pts[k]
    return SampledCurve(c.times, pts)


# ---------------------------------------------------------------------------
# order


def ranges_match(u: SampledCurve, v: SampledCurve, eps_d=1e-6):
    """Two-sided check that each node set lies within ``eps_d`` of the other polyline."""
    a = float(np.max(kernels.polyline_distance(u.points, v.points)))
    b = float(np.max(kernels.polyline_distance(v.points, u.points)))
    return max(a, b) <= eps_d


def match_reparam(u: SampledCurve, v: SampledCurve, space: Optional[MetricSpace] = None, eps_d=1e-6,
                  tol=None):
    """Witness ``z`` with ``u(t) = v(z(t))``, or ``None`` if none is found.

    A forward pass computes, for every node of ``u``, the window of times of
    ``v`` reachable by an increasing map with ``z(0) = 0`` and increments at
    most ``dt + tol``; a backward pass picks the left-most admissible value.
    The result is then checked node by node, for the 1-Lipschitz bound over all
    pairs, and for the range condition ``R[v] in closure R[u]``.
    """
    if tol is None:
        tol = 0.5 * float(np.median(np.diff(u.times)))
    grid = merge_grids(u.times, v.times[v.times <= u.horizon])
    if grid.shape[0] != u.times.shape[0]:
        u = resample(u, grid)
    dt = np.diff(u.times)
    lo, hi, fail = kernels.reachable_windows(u.points, dt, v.points, v.times, eps_d, tol)
    if fail >= 0:
        return None
    z = np.empty_like(lo)
    z[-1] = lo[-1]
    for i in range(z.shape[0] - 1, 0, -1):
        z[i - 1] = min(max(lo[i - 1], z[i] - dt[i - 1]), hi[i - 1])
    z[0] = 0.0
    m = TimeReparam(u.times, z)
    if not check_one_lipschitz(m, tol):
        return None
    drop, excess = lipschitz_defect(m)
    if drop > tol or excess > tol:
        return None
    sp = _space(u, space)
    matched = np.empty_like(u.points)
    for k in range(u.dim):
        matched[:, k] = np.interp(z, v.times, v.points[:, k])
    # interpolating at a rounded time costs a few ulps of position
    scale = float(np.max(np.abs(u.points))) + float(np.max(metric_speed(v, sp), initial=0.0)) * v.horizon
    if np.max(sp.distance(matched, u.points)) > eps_d + 64.0 * np.finfo(float).eps * max(scale, 1.0):
        return None
    if np.max(kernels.polyline_distance(v.points, u.points)) > eps_d:
        return None
    return m


def precedes(u: SampledCurve, v: SampledCurve, space: Optional[MetricSpace] = None, eps_d=1e-6, tol=None):
    """True iff ``u`` is a slowed-down copy of ``v`` (a witness exists)."""
    return match_reparam(u, v, space, eps_d, tol) is not None


def min_separation(points, chunk=512):
    """``(distance, i, j)`` for the closest pair of distinct node indices."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        return np.inf, -1, -1
    if pts.shape[1] == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        gaps = np.diff(pts[order, 0])
        k = int(np.argmin(gaps))
        i, j = sorted((int(order[k]), int(order[k + 1])))
        return float(gaps[k]), i, j
    best, bi, bj = np.inf, -1, -1
    for a in range(0, n, chunk):
        blk = pts[a:a + chunk]
        d = np.sqrt(((blk[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        rows = np.arange(blk.shape[0])
        d[rows, a + rows] = np.inf
        d[:, : a] = np.inf  # pairs with j < a were seen already
        k = int(np.argmin(d))
        r, col = divmod(k, n)
        if d[r, col] < best:
            best, bi, bj = float(d[r, col]), a + r, col
    return best, min(bi, bj), max(bi, bj)


# ---------------------------------------------------------------------------
# non-return property


@dataclass
class NonReturnReport:
    """``passed`` is False when the curve returns to an earlier point after leaving it."""

    passed: bool
    first: Optional[float] = None
    away: Optional[float] = None
    back: Optional[float] = None

    def to_dict(self):
        return {"passed": self.passed, "first": self.first, "away": self.away, "back": self.back}


def check_non_return(c: SampledCurve, space: Optional[MetricSpace] = None, eps_d=1e-6, far=None):
    """``u(s) = u(t)`` must force ``u`` constant on ``[s, t]``.

    Flags ``s < r < t`` with ``u(t)`` within ``eps_d`` of ``u(s)`` while
    ``u(r)`` is farther than ``far`` (default ``2 eps_d``) from ``u(s)``.  The
    node ``t`` is compared with earlier nodes and with the earlier polyline,
    so returns between grid nodes are caught too.
    """
    far = 2.0 * eps_d if far is None else float(far)
    i, r, j = kernels.return_violation(c.points, eps_d, far)
    t = c.times
    if i >= 0:
        return NonReturnReport(False, float(t[i]), float(t[r]), float(t[j]))
    sp = _space(c, space)
    first = kernels.leftmost_match(c.points, c.points, c.times, eps_d)
    for j in np.flatnonzero(first < t - 1e-15 * max(1.0, c.horizon)):
        s = first[j]
        between = (t > s) & (t < t[j])
        if not between.any():
            continue
        dist = sp.distance(c.points[between], c.points[j])
        if np.max(dist) > far:
            r = int(np.flatnonzero(between)[np.argmax(dist > far)])
            return NonReturnReport(False, float(s), float(t[r]), float(t[j]))
    # and an earlier node crossed by a later segment
    for i in range(len(c) - 2):
        away = sp.distance(c.points[i + 1:], c.points[i]) > far
        if not away.any():
            continue
        r = i + 1 + int(np.argmax(away))
        hit = kernels.leftmost_match(c.points[i:i + 1], c.points[r:], t[r:], eps_d)[0]
        if np.isfinite(hit):
            return NonReturnReport(False, float(t[i]), float(t[r]), float(hit))
    return NonReturnReport(True)


# ---------------------------------------------------------------------------
# minimality


@dataclass
class MinimalityReport:
    """Critical dwell time of a curve before its freeze time.

    ``critical_measure`` sums grid cells in ``[0, t_star)`` whose endpoints
    both have ``g <= eps_g``; ``omega`` lists the maximal runs of the other
    cells.  ``speed_measure`` repeats the count with chord speed in place of
    ``g``, a cross-check since both agree along solutions.
    """

    t_star: float
    critical_measure: float
    omega: list
    verdict: str
    tol: float
    eps_g: float
    eps_d: float
    speed_measure: float
    flags: list = field(default_factory=list)

    @property
    def minimal(self):
        return self.verdict == "minimal"

    def to_dict(self):
        return {
            "t_star": self.t_star,
            "t_star_label": f"T* (eps_d = {self.eps_d:g})",
            "critical_measure": self.critical_measure,
            "speed_measure": self.speed_measure,
            "omega": [list(iv) for iv in self.omega],
            "verdict": self.verdict,
            "tol": self.tol,
            "eps_g": self.eps_g,
            "eps_d": self.eps_d,
            "flags": list(self.flags),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def _critical_cells(p: FlowProblem, c: SampledCurve, eps_g=None):
    g = p.g(c.points)
    eps_g = p.critical_threshold(g) if eps_g is None else float(eps_g)
    low = g <= eps_g
    return low[:-1] & low[1:], eps_g


def _runs(mask, times):
    out = []
    k = 0
    n = mask.shape[0]
    while k < n:
        if mask[k]:
            j = k
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((float(times[k]), float(times[j + 1])))
            k = j + 1
        else:
            k += 1
    return out


def critical_time_measure(p: FlowProblem, c: SampledCurve, eps_g=None, tol=None):
    """Measure of critical time before the freeze time, with ``Omega``.

    ``tol`` (default twice the largest grid step) only sets the preliminary
    verdict; see :func:`is_minimal`.
    """
    dt = np.diff(c.times)
    tol = 2.0 * float(np.max(dt)) if tol is None else float(tol)
    crit, eps_g = _critical_cells(p, c, eps_g)
    ts = t_star(c, p.space, p.eps_d)
    kstar = int(np.searchsorted(c.times, ts))
    active = np.arange(dt.shape[0]) < kstar
    measure = float(np.sum(dt[crit & active]))
    slow = (metric_speed(c, p.space) <= eps_g) & active
    speed_measure = float(np.sum(dt[slow]))
    flags = []
    if abs(speed_measure - measure) > float(np.max(dt)):
        flags.append("speed/g critical sets disagree beyond one grid cell")
    verdict = "minimal" if measure <= tol else "not-minimal"
    omega = _runs(~crit & active, c.times)
    return MinimalityReport(ts, measure, omega, verdict, tol, eps_g, p.eps_d, speed_measure, flags)


def _require_solution(p, c, edi_tol):
    ok, report = is_solution(p, c, edi_tol)
    if not ok:
        raise NotASolutionError(
            f"curve violates the dissipation inequality (max residual {report.max_residual:.3g} "
            f"> tol {report.tolerance:.3g})",
            report,
        )
    return report


def is_minimal(p: FlowProblem, c: SampledCurve, tol=None, edi_tol=None, run_sug=True):
    """Minimality verdict from the critical dwell time.

    The verdict is ``"inconclusive"`` when the ``g``-based and speed-based
    measures fall on different sides of ``tol``.  The caveat flag is attached
    unless a strong-upper-gradient check ran and passed.
    """
    _require_solution(p, c, edi_tol)
    rep = critical_time_measure(p, c, tol=tol)
    if (rep.critical_measure <= rep.tol) != (rep.speed_measure <= rep.tol):
        rep.verdict = "inconclusive"
    if not (run_sug and sug_check(p, c)[0]):
        rep.flags.append(SUG_CAVEAT)
    return rep


def extract_minimal(p: FlowProblem, c: SampledCurve, edi_tol=None, check=True):
    """Delete critical dwell time: returns ``(w, z)`` with ``c = w o z`` on nodes.

    ``z`` grows with slope 1 on ``Omega`` and is flat on critical cells and
    after the freeze time.  ``w`` keeps the left-most node of every plateau of
    ``z``; a frozen tail is carried over unchanged after ``z(t_star)``.
    """
    if check:
        _require_solution(p, c, edi_tol)
    crit, _ = _critical_cells(p, c)
    dt = np.diff(c.times)
    kstar = int(np.searchsorted(c.times, t_star(c, p.space, p.eps_d)))
    grow = ~crit & (np.arange(dt.shape[0]) < kstar)
    z = np.concatenate([[0.0], np.cumsum(np.where(grow, dt, 0.0))])
    keep = np.concatenate([[True], grow])
    keep[kstar + 1:] = False
    times = z[keep]
    points = c.points[keep]
    if kstar < len(c) - 1:
        # frozen: the tail after the freeze time follows z(t_star) unchanged
        times = np.concatenate([times, z[kstar] + (c.times[kstar + 1:] - c.times[kstar])])
        points = np.concatenate([points, c.points[kstar + 1:]])
    elif times.shape[0] < 2:
        # moving but never off the critical set at this threshold: nothing to delete
        return c, TimeReparam(c.times, np.zeros_like(c.times))
    return SampledCurve(times, points), TimeReparam(c.times, z)


# ---------------------------------------------------------------------------
# singular dilation


def singular_dilate(w: SampledCurve, beta: TimeReparam):
    """``u = w o beta^-1`` sampled on ``beta(w.times)``.

    ``beta`` must be strictly increasing with increments at least the grid
    increments, so that ``beta^-1`` is 1-Lipschitz and ``u`` precedes ``w``.
    """
    b = beta(w.times)
    db = np.diff(b)
    if b[0] != 0.0 or not np.all(db > 0.0):
        raise DomainError("dilation must be strictly increasing with beta(0) = 0")
    if np.any(db < np.diff(w.times) - 4.0 * np.spacing(b[1:])):
        raise DomainError("dilation increments must dominate the time increments")
    return SampledCurve(b, w.points)


def cantor_time_change(p: FlowProblem, w: SampledCurve, depth, mass=None):
    """Dilation ``beta(s) = s + F(s)`` with ``F`` a singular mass on critical crossings.

    Each maximal run of critical cells of ``w`` is one crossing of the critical
    set.  Its share of ``mass`` (default: the horizon of ``w``) is the Cantor
    measure of a window of half a level-``depth`` interval around the crossing
    point, read off as an increment of :func:`kernels.cantor_function`; runs
    touching position 0 or 1 get none.  Within a run the mass sits on the cell
    where ``g`` is smallest.
    """
    mass = w.horizon if mass is None else float(mass)
    crit, _ = _critical_cells(p, w)
    g = p.g(w.points)
    half = 0.5 * 3.0 ** -int(depth)
    weights = np.zeros(crit.shape[0])
    k = 0
    n = crit.shape[0]
    while k < n:
        if not crit[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and crit[j + 1]:
            j += 1
        cells = np.arange(k, j + 1)
        best = cells[np.argmin(np.maximum(g[cells], g[cells + 1]))]
        x = 0.5 * (w.points[best, 0] + w.points[best + 1, 0])
        if half < x < 1.0 - half:
            lo, hi = kernels.cantor_function(np.array([x - half, x + half]), int(depth))
            weights[best] = hi - lo
        k = j + 1
    total = float(np.sum(weights))
    if total <= 0.0:
        raise PreconditionError("curve crosses no critical points away from the ends")
    extra = np.concatenate([[0.0], np.cumsum(mass * weights / total)])
    return TimeReparam(w.times, w.times + extra)


# ---------------------------------------------------------------------------
# energy comparison


@dataclass
class PsiReport:
    passed: bool
    first_violation: Optional[float]
    max_excess: float

    def to_dict(self):
        return {"passed": self.passed, "first_violation": self.first_violation, "max_excess": self.max_excess}


def psi_compare(p: FlowProblem, u: SampledCurve, v: SampledCurve, tol=1e-12):
    """Check ``phi(u(t)) <= phi(v(t)) + tol`` on the merged grid.

    Both curves are held at their final point past their horizon.  The curves
    must trace the same range at ``eps_d``.
    """
    if not ranges_match(u, v, p.eps_d):
        raise PreconditionError("energy comparison needs curves with matching ranges")
    grid = merge_grids(u.times, v.times)
    pu = p.phi(resample(u, grid, extend=True).points)
    pv = p.phi(resample(v, grid, extend=True).points)
    excess = pu - pv
    bad = excess > tol
    first = float(grid[int(np.argmax(bad))]) if np.any(bad) else None
    return PsiReport(not bool(np.any(bad)), first, float(np.max(excess)))
