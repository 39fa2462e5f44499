"""Hot inner loops, each in two flavours.

Every kernel exists as a numba-compiled loop (``*_nb``) and as a numpy
implementation (``*_np``).  The public names bound at the bottom of the module
point to one or the other according to :data:`lambdaflow._accel.USE_NUMBA`.
``BACKENDS`` exposes both sets so tests and benchmarks can compare them.

All point arrays are ``(n, d)`` float64, Euclidean distance throughout.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "BACKENDS",
    "cantor_function",
    "return_violation",
    "freeze_index",
    "leftmost_match",
    "max_rise",
    "node_match_bounds",
    "polyline_distance",
    "reachable_windows",
]


# ---------------------------------------------------------------------------
# max_rise: max_{i <= j} a[j] - a[i]


@njit
def _max_rise_nb(a):
    best = 0.0
    bi = 0
    bj = 0
    imin = 0
    for j in range(a.shape[0]):
        if a[j] < a[imin]:
            imin = j
        rise = a[j] - a[imin]
        if rise > best:
            best = rise
            bi = imin
            bj = j
    return best, bi, bj


def _max_rise_np(a):
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0.0, 0, 0
    run_min = np.minimum.accumulate(a)
    rise = a - run_min
    j = int(np.argmax(rise))
    best = float(rise[j])
    if best <= 0.0:
        return 0.0, 0, 0
    # first index where the running minimum attains its value at j
    i = int(np.argmax(a[: j + 1] == run_min[j]))
    return best, i, j


# ---------------------------------------------------------------------------
# freeze_index: smallest k with d(p_j, p_k) <= eps for all j >= k


@njit
def _freeze_index_nb(points, eps):
    n, d = points.shape
    eps2 = eps * eps
    last = n - 1
    for k in range(n):
        # cheap rejection against the final node first
        s = 0.0
        for c in range(d):
            diff = points[last, c] - points[k, c]
            s += diff * diff
        if s > eps2:
            continue
        ok = True
        for j in range(k + 1, last):
            s = 0.0
            for c in range(d):
                diff = points[j, c] - points[k, c]
                s += diff * diff
            if s > eps2:
                ok = False
                break
        if ok:
            return k
    return last


def _freeze_index_np(points, eps):
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    to_last = np.linalg.norm(points - points[-1], axis=1)
    for k in np.flatnonzero(to_last <= eps):
        if np.all(np.linalg.norm(points[k:] - points[k], axis=1) <= eps):
            return int(k)
    return n - 1


# ---------------------------------------------------------------------------
# return_violation: u(i) ~ u(j) but some intermediate node strays further than far


@njit
def _return_violation_nb(points, eps, far):
    n, d = points.shape
    eps2 = eps * eps
    far2 = far * far
    for i in range(n):
        far_at = -1
        for j in range(i + 1, n):
            s = 0.0
            for c in range(d):
                diff = points[j, c] - points[i, c]
                s += diff * diff
            if far_at < 0:
                if s > far2:
                    far_at = j
            elif s <= eps2:
                return i, far_at, j
    return -1, -1, -1


def _return_violation_np(points, eps, far):
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    for i in range(n - 2):
        dist = np.linalg.norm(points[i + 1:] - points[i], axis=1)
        strays = np.flatnonzero(dist > far)
        if strays.size == 0:
            continue
        r = int(strays[0])
        back = np.flatnonzero(dist[r + 1:] <= eps)
        if back.size:
            return i, i + 1 + r, i + 2 + r + int(back[0])
    return -1, -1, -1


# ---------------------------------------------------------------------------
# segment geometry shared by the matchers


@njit
def _segment_hit_nb(a, b, q, eps):
    """Parameter interval [lam0, lam1] of segment a->b within eps of q.

    Solved as projection plus half-width from the perpendicular residual,
    which avoids the cancellation of the expanded quadratic when eps is tiny.
    """
    d = a.shape[0]
    aa = 0.0
    proj = 0.0
    for c in range(d):
        delta = b[c] - a[c]
        aa += delta * delta
        proj += (q[c] - a[c]) * delta
    if aa == 0.0:
        s = 0.0
        for c in range(d):
            diff = q[c] - a[c]
            s += diff * diff
        if s <= eps * eps:
            return 0.0, 1.0
        return 1.0, 0.0
    lam = proj / aa
    h2 = 0.0
    for c in range(d):
        r = q[c] - (a[c] + lam * (b[c] - a[c]))
        h2 += r * r
    gap = eps * eps - h2
    if gap < 0.0:
        return 1.0, 0.0
    half = np.sqrt(gap / aa)
    lam0 = lam - half
    lam1 = lam + half
    if lam0 < 0.0:
        lam0 = 0.0
    if lam1 > 1.0:
        lam1 = 1.0
    return lam0, lam1


def _segment_hits_np(a, b, q, eps):
    """Vectorised ``_segment_hit_nb`` over segment arrays ``a``, ``b``."""
    delta = b - a
    rel = q - a
    aa = np.einsum("ij,ij->i", delta, delta)
    still = aa == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(still, 0.0, np.einsum("ij,ij->i", rel, delta) / np.where(still, 1.0, aa))
    resid = rel - lam[:, None] * delta
    gap = eps * eps - np.einsum("ij,ij->i", resid, resid)
    ok = gap >= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        half = np.where(still, np.inf, np.sqrt(np.maximum(gap, 0.0) / np.where(still, 1.0, aa)))
    lam0 = np.where(ok, np.maximum(lam - half, 0.0), 1.0)
    lam1 = np.where(ok, np.minimum(lam + half, 1.0), 0.0)
    return lam0, lam1


# ---------------------------------------------------------------------------
# polyline_distance: distance from each query to a piecewise-linear curve


@njit
def _polyline_distance_nb(queries, poly):
    nq, d = queries.shape
    m = poly.shape[0]
    out = np.empty(nq)
    for i in range(nq):
        best = np.inf
        for k in range(m):
            s = 0.0
            for c in range(d):
                diff = poly[k, c] - queries[i, c]
                s += diff * diff
            if s < best:
                best = s
        for k in range(m - 1):
            aa = 0.0
            ab = 0.0
            for c in range(d):
                delta = poly[k + 1, c] - poly[k, c]
                aa += delta * delta
                ab += delta * (queries[i, c] - poly[k, c])
            if aa == 0.0:
                continue
            lam = ab / aa
            if lam <= 0.0 or lam >= 1.0:
                continue
            s = 0.0
            for c in range(d):
                diff = poly[k, c] + lam * (poly[k + 1, c] - poly[k, c]) - queries[i, c]
                s += diff * diff
            if s < best:
                best = s
        out[i] = np.sqrt(best)
    return out


def _polyline_distance_np(queries, poly, chunk=256):
    queries = np.asarray(queries, dtype=np.float64)
    poly = np.asarray(poly, dtype=np.float64)
    a = poly[:-1]
    delta = poly[1:] - a
    aa = np.einsum("ij,ij->i", delta, delta)
    safe = np.where(aa > 0.0, aa, 1.0)
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        node = np.sqrt(((q[:, None, :] - poly[None, :, :]) ** 2).sum(-1)).min(axis=1)
        if a.shape[0]:
            rel = q[:, None, :] - a[None, :, :]
            lam = np.einsum("qkc,kc->qk", rel, delta) / safe
            lam = np.clip(lam, 0.0, 1.0)
            foot = a[None, :, :] + lam[..., None] * delta[None, :, :]
            seg = np.sqrt(((foot - q[:, None, :]) ** 2).sum(-1)).min(axis=1)
            node = np.minimum(node, seg)
        out[start:start + chunk] = node
    return out


# ---------------------------------------------------------------------------
# leftmost_match: earliest time s with d(v(s), q) <= eps, NaN when absent


@njit
def _leftmost_match_nb(queries, v_pts, v_times, eps):
    nq = queries.shape[0]
    m = v_pts.shape[0]
    out = np.full(nq, np.nan)
    d = queries.shape[1]
    for i in range(nq):
        for k in range(m - 1):
            # bounding-box reject before the exact test
            outside = False
            for c in range(d):
                a = v_pts[k, c]
                b = v_pts[k + 1, c]
                q = queries[i, c]
                if (q < a - eps and q < b - eps) or (q > a + eps and q > b + eps):
                    outside = True
                    break
            if outside:
                continue
            lam0, lam1 = _segment_hit_nb(v_pts[k], v_pts[k + 1], queries[i], eps)
            if lam0 <= lam1:
                out[i] = v_times[k] + lam0 * (v_times[k + 1] - v_times[k])
                break
        if np.isnan(out[i]) and m == 1:
            s = 0.0
            for c in range(queries.shape[1]):
                diff = v_pts[0, c] - queries[i, c]
                s += diff * diff
            if s <= eps * eps:
                out[i] = v_times[0]
    return out


def _leftmost_match_np(queries, v_pts, v_times, eps):
    queries = np.asarray(queries, dtype=np.float64)
    out = np.full(queries.shape[0], np.nan)
    a = v_pts[:-1]
    b = v_pts[1:]
    dt = np.diff(v_times)
    for i, q in enumerate(queries):
        lam0, lam1 = _segment_hits_np(a, b, q, eps)
        hit = np.flatnonzero(lam0 <= lam1)
        if hit.size:
            k = hit[0]
            out[i] = v_times[k] + lam0[k] * dt[k]
    return out


# ---------------------------------------------------------------------------
# node_match_bounds: first and last node time within eps of each query


@njit
def _node_match_bounds_nb(queries, nodes, times, eps):
    nq, d = queries.shape
    m = nodes.shape[0]
    first = np.full(nq, np.nan)
    last = np.full(nq, np.nan)
    eps2 = eps * eps
    for i in range(nq):
        for k in range(m):
            s = 0.0
            for c in range(d):
                diff = nodes[k, c] - queries[i, c]
                s += diff * diff
            if s <= eps2:
                if np.isnan(first[i]):
                    first[i] = times[k]
                last[i] = times[k]
    return first, last


def _node_match_bounds_np(queries, nodes, times, eps, chunk=256):
    queries = np.asarray(queries, dtype=np.float64)
    first = np.full(queries.shape[0], np.nan)
    last = np.full(queries.shape[0], np.nan)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        close = np.sqrt(((q[:, None, :] - nodes[None, :, :]) ** 2).sum(-1)) <= eps
        any_ = close.any(axis=1)
        fi = np.argmax(close, axis=1)
        li = nodes.shape[0] - 1 - np.argmax(close[:, ::-1], axis=1)
        sl = slice(start, start + q.shape[0])
        first[sl] = np.where(any_, times[fi], np.nan)
        last[sl] = np.where(any_, times[li], np.nan)
    return first, last


# ---------------------------------------------------------------------------
# reachable_windows: forward pass of the monotone 1-Lipschitz matcher
#
# lo[i], hi[i] bound the times s of v that u(t_i) can be matched to by some
# increasing map with z(0) = 0 and increments <= dt + tol.  fail >= 0 marks the
# first node with an empty window.


@njit
def _reachable_windows_nb(u_pts, u_dt, v_pts, v_times, eps, tol):
    n = u_pts.shape[0]
    m = v_pts.shape[0]
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    s = 0.0
    for c in range(u_pts.shape[1]):
        diff = v_pts[0, c] - u_pts[0, c]
        s += diff * diff
    if s > eps * eps:
        return lo, hi, 0
    lo[0] = 0.0
    hi[0] = 0.0
    for i in range(1, n):
        wa = lo[i - 1]
        wb = hi[i - 1] + u_dt[i - 1] + tol
        best_lo = np.inf
        best_hi = -np.inf
        k = np.searchsorted(v_times, wa, side="right") - 1
        if k < 0:
            k = 0
        while k < m - 1 and v_times[k] <= wb:
            lam0, lam1 = _segment_hit_nb(v_pts[k], v_pts[k + 1], u_pts[i], eps)
            if lam0 <= lam1:
                t0 = v_times[k] + lam0 * (v_times[k + 1] - v_times[k])
                t1 = v_times[k] + lam1 * (v_times[k + 1] - v_times[k])
                if t0 < wa:
                    t0 = wa
                if t1 > wb:
                    t1 = wb
                if t0 <= t1:
                    if t0 < best_lo:
                        best_lo = t0
                    if t1 > best_hi:
                        best_hi = t1
            k += 1
        if best_lo > best_hi:
            return lo, hi, i
        lo[i] = best_lo
        hi[i] = best_hi
    return lo, hi, -1


def _reachable_windows_np(u_pts, u_dt, v_pts, v_times, eps, tol):
    n = u_pts.shape[0]
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    if np.linalg.norm(v_pts[0] - u_pts[0]) > eps:
        return lo, hi, 0
    lo[0] = hi[0] = 0.0
    for i in range(1, n):
        wa = lo[i - 1]
        wb = hi[i - 1] + u_dt[i - 1] + tol
        k0 = max(int(np.searchsorted(v_times, wa, side="right")) - 1, 0)
        k1 = int(np.searchsorted(v_times, wb, side="right"))
        k1 = min(max(k1, k0 + 1), v_pts.shape[0] - 1)
        a = v_pts[k0:k1]
        b = v_pts[k0 + 1:k1 + 1]
        lam0, lam1 = _segment_hits_np(a, b, u_pts[i], eps)
        t = v_times[k0:k1 + 1]
        span = np.diff(t)
        t0 = np.maximum(t[:-1] + lam0 * span, wa)
        t1 = np.minimum(t[:-1] + lam1 * span, wb)
        ok = (lam0 <= lam1) & (t0 <= t1)
        if not ok.any():
            return lo, hi, i
        lo[i] = t0[ok].min()
        hi[i] = t1[ok].max()
    return lo, hi, -1


# ---------------------------------------------------------------------------
# cantor_function: devil's staircase by ternary digit scan, truncated at depth


@njit
def _cantor_function_nb(x, depth):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xi = x[i]
        if xi <= 0.0:
            out[i] = 0.0
            continue
        if xi >= 1.0:
            out[i] = 1.0
            continue
        value = 0.0
        scale = 0.5
        done = False
        for _ in range(depth):
            xi *= 3.0
            digit = int(xi)
            if digit > 2:
                digit = 2
            xi -= digit
            if digit == 1:
                value += scale
                done = True
                break
            if digit == 2:
                value += scale
            scale *= 0.5
        if not done:
            value += 2.0 * scale * xi
        out[i] = value
    return out


def _cantor_function_np(x, depth):
    x = np.asarray(x, dtype=np.float64)
    rem = np.clip(x, 0.0, 1.0).copy()
    value = np.zeros_like(rem)
    active = (x > 0.0) & (x < 1.0)
    scale = 0.5
    for _ in range(depth):
        rem = np.where(active, rem * 3.0, rem)
        digit = np.minimum(np.floor(rem), 2.0)
        rem = np.where(active, rem - digit, rem)
        value = np.where(active & (digit >= 1.0), value + scale, value)
        active = active & (digit != 1.0)
        scale *= 0.5
    value = np.where(active, value + 2.0 * scale * rem, value)
    value = np.where(x >= 1.0, 1.0, value)
    return np.where(x <= 0.0, 0.0, value)


# ---------------------------------------------------------------------------
# dispatch

BACKENDS = {
    "numba": {
        "max_rise": _max_rise_nb,
        "freeze_index": _freeze_index_nb,
        "return_violation": _return_violation_nb,
        "polyline_distance": _polyline_distance_nb,
        "leftmost_match": _leftmost_match_nb,
        "node_match_bounds": _node_match_bounds_nb,
        "reachable_windows": _reachable_windows_nb,
        "cantor_function": _cantor_function_nb,
    },
    "numpy": {
        "max_rise": _max_rise_np,
        "freeze_index": _freeze_index_np,
        "return_violation": _return_violation_np,
        "polyline_distance": _polyline_distance_np,
        "leftmost_match": _leftmost_match_np,
        "node_match_bounds": _node_match_bounds_np,
        "reachable_windows": _reachable_windows_np,
        "cantor_function": _cantor_function_np,
    },
}

_active = BACKENDS["numba" if USE_NUMBA else "numpy"]


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def max_rise(a):
    """Largest increase ``a[j] - a[i]`` over ``i <= j`` and its index pair."""
    best, i, j = _active["max_rise"](_f64(a))
    return float(best), int(i), int(j)


def freeze_index(points, eps):
    """Index of the first node after which the curve stays within ``eps``."""
    return int(_active["freeze_index"](_f64(points), float(eps)))


def return_violation(points, eps, far):
    """First ``(i, r, j)`` with ``p_j`` back at ``p_i`` after straying to ``p_r``.

    Returns ``(-1, -1, -1)`` when the node sequence never returns.
    """
    i, r, j = _active["return_violation"](_f64(points), float(eps), float(far))
    return int(i), int(r), int(j)


def polyline_distance(queries, poly):
    return _active["polyline_distance"](_f64(queries), _f64(poly))


def leftmost_match(queries, v_pts, v_times, eps):
    return _active["leftmost_match"](_f64(queries), _f64(v_pts), _f64(v_times), float(eps))


def node_match_bounds(queries, nodes, times, eps):
    return _active["node_match_bounds"](_f64(queries), _f64(nodes), _f64(times), float(eps))


def reachable_windows(u_pts, u_dt, v_pts, v_times, eps, tol):
    lo, hi, fail = _active["reachable_windows"](
        _f64(u_pts), _f64(u_dt), _f64(v_pts), _f64(v_times), float(eps), float(tol)
    )
    return lo, hi, int(fail)


def cantor_function(x, depth):
    scalar = np.ndim(x) == 0
    out = _active["cantor_function"](np.atleast_1d(_f64(x)), int(depth))
    return float(out[0]) if scalar else out
