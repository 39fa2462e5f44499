"""Energies, candidate upper gradients and the scenario catalog.

Three scenarios ship with closed-form oracles:

``quadratic``
    ``phi(x) = |x|^2 / 2`` with ``g = |x|``; solutions ``x0 * exp(-t)``.
``degenerate``
    ``phi(x) = -(3/4) x^(4/3)`` on ``x >= 0`` with ``g = x^(1/3)``.  The point
    ``0`` is critical and every ``x_tau(t) = ((2/3)(t - tau)_+)^(3/2)`` solves
    the flow: wait at ``0`` for time ``tau``, then leave.  ``x_0`` is minimal.
``cantor``
    ``g(x) = dist(x, E)^(1/4)`` on ``[0, 1]`` where ``E`` is the set of
    endpoints of the depth-``n`` middle-thirds construction and
    ``phi(x) = -int_0^x g``.  The crossing time ``int_0^x ds / g(s)`` is
    finite because ``1/4 < 1 - log 2 / log 3``; the minimal solution is its
    inverse.  Both integrals are evaluated in closed form segment by segment.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from . import kernels
from .errors import CoercivityError, ConfigError, DomainError
from .metric import MetricSpace, SampledCurve, as_point

__all__ = [
    "CantorOracle",
    "FlowProblem",
    "SCENARIOS",
    "Scenario",
    "SlopeEstimate",
    "cantor_function",
    "cantor_scenario",
    "degenerate_departure",
    "degenerate_family",
    "degenerate_power_scenario",
    "degenerate_solution",
    "local_slope_estimate",
    "make_scenario",
    "quadratic_scenario",
    "quadratic_solution",
    "scenario_from_config",
    "uniform_grid",
]

CANTOR_EXPONENT = 0.25
MAX_CANTOR_DEPTH = 20


def _as_points(x, dim):
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.shape[0] == dim and dim > 1 else pts.reshape(-1, 1)
    if pts.shape[1] != dim:
        raise DomainError(f"points of dimension {pts.shape[1]} passed to a {dim}-d problem")
    return pts


@dataclass(frozen=True)
class FlowProblem:
    """Energy ``phi`` and candidate upper gradient ``g`` on ``R^d``.

    ``energy_fn`` and ``slope_fn`` map an ``(n, d)`` array to ``(n,)`` values;
    ``phi`` may be ``+inf`` outside its domain.  ``A``, ``B`` and ``x_star`` are
    the constants of the quadratic lower bound ``phi >= -A - B d(., x_star)^2``,
    which is asserted on every evaluation.  ``eps_g = None`` means "relative to
    the data": ``1e-8`` times the largest sampled ``g``.
    """

    space: MetricSpace
    energy_fn: Callable[[np.ndarray], np.ndarray]
    slope_fn: Callable[[np.ndarray], np.ndarray]
    A: float = 1.0
    B: float = 1.0
    x_star: np.ndarray = None
    eps_g: Optional[float] = None
    eps_d: float = 1e-6
    name: str = "custom"

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ConfigError("coercivity constants A and B must be positive")
        if self.eps_d <= 0 or (self.eps_g is not None and self.eps_g <= 0):
            raise ConfigError("tolerances must be positive")
        x_star = np.zeros(self.space.dim) if self.x_star is None else as_point(self.x_star, self.space.dim)
        object.__setattr__(self, "x_star", x_star)

    @property
    def dim(self):
        return self.space.dim

    def phi(self, x):
        """Energy at one point (scalar) or at an array of points."""
        scalar = np.ndim(x) <= 1 and (self.dim > 1 or np.ndim(x) == 0)
        pts = _as_points(x, self.dim)
        val = np.asarray(self.energy_fn(pts), dtype=np.float64).reshape(-1)
        floor = -self.A - self.B * np.sum((pts - self.x_star) ** 2, axis=1)
        bad = val < floor - 1e-12 * (1.0 + np.abs(floor))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise CoercivityError(
                f"phi({pts[i].tolist()}) = {val[i]} violates the lower bound {floor[i]}"
            )
        return float(val[0]) if scalar else val

    def g(self, x):
        """Candidate upper gradient at one point or an array of points."""
        scalar = np.ndim(x) <= 1 and (self.dim > 1 or np.ndim(x) == 0)
        pts = _as_points(x, self.dim)
        val = np.asarray(self.slope_fn(pts), dtype=np.float64).reshape(-1)
        if np.any(val < 0) or np.any(np.isnan(val)):
            raise DomainError("upper gradient must be nonnegative")
        return float(val[0]) if scalar else val

    def critical_threshold(self, g_values):
        if self.eps_g is not None:
            return float(self.eps_g)
        top = float(np.max(g_values)) if np.size(g_values) else 0.0
        return 1e-8 * top if top > 0 else 1e-300


@dataclass(frozen=True)
class Scenario:
    """A problem together with closed-form solution samplers.

    ``solutions`` maps a label to a function of a time array returning an
    ``(n, d)`` point array.
    """

    name: str
    problem: FlowProblem
    params: dict = field(default_factory=dict)
    solutions: Dict[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    oracle: object = None

    def sample(self, label, times):
        times = np.asarray(times, dtype=np.float64)
        pts = np.asarray(self.solutions[label](times), dtype=np.float64)
        return SampledCurve(times, pts.reshape(times.shape[0], -1))


def uniform_grid(horizon, dt):
    """Grid ``0, dt, 2 dt, ..., horizon`` built from integer multiples of ``dt``."""
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigError(f"horizon {horizon} is not a multiple of dt {dt}")
    grid = np.arange(n + 1) * dt
    grid[-1] = horizon
    return grid


# ---------------------------------------------------------------------------
# quadratic


def quadratic_solution(x0, times):
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    return np.exp(-np.asarray(times, dtype=np.float64))[:, None] * x0[None, :]


def quadratic_scenario(d=1, x0s=None, eps_d=1e-6):
    """``phi = |x|^2/2``, ``g = |x|``; classical flow ``u' = -u``."""
    if int(d) < 1:
        raise ConfigError("dimension must be positive")
    d = int(d)
    if x0s is None:
        x0s = [np.eye(d)[0]]
    space = MetricSpace(d)
    problem = FlowProblem(
        space,
        energy_fn=lambda x: 0.5 * np.sum(x * x, axis=1),
        slope_fn=lambda x: np.sqrt(np.sum(x * x, axis=1)),
        A=1.0,
        B=1.0,
        x_star=np.zeros(d),
        eps_d=eps_d,
        name="quadratic",
    )
    sols = {}
    for x0 in x0s:
        x0 = as_point(x0, d)
        sols[f"x0={x0.tolist()}"] = lambda t, x0=x0: quadratic_solution(x0, t)
    return Scenario("quadratic", problem, {"d": d, "x0s": [as_point(x, d).tolist() for x in x0s]}, sols)


# ---------------------------------------------------------------------------
# degenerate power: wait-then-depart non-uniqueness


def degenerate_solution(tau, times):
    """``x_tau(t) = ((2/3)(t - tau)_+)^(3/2)`` as an ``(n, 1)`` array."""
    times = np.asarray(times, dtype=np.float64)
    s = times - float(tau)
    # grid nodes that equal tau up to rounding belong to the waiting phase
    s[s <= 1e-12 * max(1.0, abs(tau))] = 0.0
    return ((2.0 / 3.0) * s)[:, None] ** 1.5


def degenerate_departure(x0, times):
    """Solution from ``x0 > 0``: ``((2/3) t + x0^(2/3))^(3/2)``."""
    times = np.asarray(times, dtype=np.float64)
    return ((2.0 / 3.0) * times + float(x0) ** (2.0 / 3.0))[:, None] ** 1.5


def _degenerate_phi(x):
    x = x[:, 0]
    out = np.full(x.shape, np.inf)
    ok = x >= 0
    out[ok] = -0.75 * x[ok] ** (4.0 / 3.0)
    return out


def _degenerate_g(x):
    x = x[:, 0]
    return np.where(x >= 0, np.cbrt(np.maximum(x, 0.0)), 0.0)


def degenerate_power_scenario(tau_list=(0.0, 0.1, 0.25, 0.5), horizon=2.0, eps_d=1e-6):
    """1-D energy ``-(3/4) x^(4/3)`` (``+inf`` for ``x < 0``) with ``g = x^(1/3)``."""
    taus = [float(t) for t in tau_list]
    if any(t < 0 for t in taus):
        raise ConfigError("waiting times must be nonnegative")
    if taus and not horizon > max(taus):
        raise ConfigError("horizon must exceed every waiting time")
    x_max = float(degenerate_solution(0.0, [horizon])[0, 0])
    A = 1.0 + 0.75 * x_max ** (4.0 / 3.0)
    problem = FlowProblem(
        MetricSpace(1), _degenerate_phi, _degenerate_g, A=A, B=1.0, x_star=[0.0], eps_d=eps_d, name="degenerate"
    )
    sols = {f"tau={t}": (lambda times, t=t: degenerate_solution(t, times)) for t in taus}
    return Scenario("degenerate", problem, {"tau_list": taus, "horizon": float(horizon)}, sols)


def degenerate_family(taus, window, dt):
    """Curves ``x_tau`` on ``[0, tau + window]`` sharing the range ``[0, x_0(window)]``."""
    out = []
    for tau in taus:
        times = uniform_grid(tau + window, dt)
        out.append(SampledCurve(times, degenerate_solution(tau, times)))
    return out


# ---------------------------------------------------------------------------
# Cantor


def cantor_function(x, depth):
    """Devil's staircase truncated after ``depth`` ternary digits.

    Linear on each depth-``depth`` interval and constant on removed gaps, so
    the result is continuous and nondecreasing.
    """
    if int(depth) < 1:
        raise ConfigError("depth must be a positive integer")
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > 1):
        raise DomainError("cantor_function is defined on [0, 1]")
    return kernels.cantor_function(x, int(depth))


class CantorOracle:
    """Closed-form integrals for ``g = dist(., E)^alpha`` on ``[0, 1]``.

    On a segment between consecutive endpoints with half-width ``h`` the
    distance is a tent, so ``int g`` and ``int 1/g`` reduce to
    ``y^(alpha + 1) / (alpha + 1)`` and ``y^(1 - alpha) / (1 - alpha)``.
    """

    def __init__(self, depth, alpha=CANTOR_EXPONENT):
        depth = int(depth)
        if not 1 <= depth <= MAX_CANTOR_DEPTH:
            raise ConfigError(f"cantor depth must be in [1, {MAX_CANTOR_DEPTH}], got {depth}")
        if not 0 < alpha < 1 - np.log(2) / np.log(3):
            raise ConfigError("exponent must lie in (0, 1 - log2/log3) for finite crossing time")
        self.depth = depth
        self.alpha = float(alpha)
        lefts = np.array([0.0])
        for k in range(1, depth + 1):
            lefts = np.concatenate([lefts, lefts + 2.0 / 3.0**k])
        ends = np.sort(np.concatenate([lefts, lefts + 3.0**-depth]))
        ends[-1] = 1.0
        self.endpoints = ends
        self.half = 0.5 * np.diff(ends)
        pa = self.alpha + 1.0
        pt = 1.0 - self.alpha
        self._seg_energy = 2.0 * self.half**pa / pa
        self._seg_time = 2.0 * self.half**pt / pt
        self._energy_prefix = np.concatenate([[0.0], np.cumsum(self._seg_energy)])
        self._time_prefix = np.concatenate([[0.0], np.cumsum(self._seg_time)])

    @property
    def total_time(self):
        """Crossing time of ``[0, 1]``."""
        return float(self._time_prefix[-1])

    @property
    def interior_endpoints(self):
        return self.endpoints[1:-1]

    def dist(self, x):
        x = np.asarray(x, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.endpoints, x), 1, self.endpoints.shape[0] - 1)
        return np.minimum(np.abs(x - self.endpoints[idx - 1]), np.abs(self.endpoints[idx] - x))

    def g(self, x):
        return self.dist(x) ** self.alpha

    def _segment(self, x):
        k = np.searchsorted(self.endpoints, x, side="right") - 1
        return np.clip(k, 0, self.half.shape[0] - 1)

    def _tent_integral(self, x, power, seg_total, prefix):
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        k = self._segment(x)
        a = np.maximum(x - self.endpoints[k], 0.0)
        b = np.maximum(self.endpoints[k + 1] - x, 0.0)
        piece = np.where(a <= self.half[k], a**power / power, seg_total[k] - b**power / power)
        return prefix[k] + piece

    def phi(self, x):
        x = np.asarray(x, dtype=np.float64)
        pa = self.alpha + 1.0
        inside = -self._tent_integral(x, pa, self._seg_energy, self._energy_prefix)
        below = np.abs(np.minimum(x, 0.0)) ** pa / pa
        above = -self._energy_prefix[-1] - np.maximum(x - 1.0, 0.0) ** pa / pa
        return np.where(x < 0, below, np.where(x > 1, above, inside))

    def crossing_time(self, x):
        """``int_0^x ds / g(s)`` for ``x`` in ``[0, 1]``."""
        return self._tent_integral(x, 1.0 - self.alpha, self._seg_time, self._time_prefix)

    def position(self, t):
        """Inverse of :meth:`crossing_time`; held at ``1`` after the total time."""
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, self.total_time)
        pt = 1.0 - self.alpha
        k = np.clip(np.searchsorted(self._time_prefix, t, side="right") - 1, 0, self.half.shape[0] - 1)
        r = t - self._time_prefix[k]
        half_time = self._seg_time[k] / 2.0
        back = np.maximum(self._time_prefix[k + 1] - t, 0.0)
        left = self.endpoints[k] + (pt * r) ** (1.0 / pt)
        right = self.endpoints[k + 1] - (pt * back) ** (1.0 / pt)
        return np.where(r <= half_time, left, right)

    def minimal_grid(self, dt, eps_g, cluster=4, inner=1e-9):
        """Uniform grid on ``[0, total_time]`` plus node clusters at critical crossings.

        Around the crossing time ``c`` of each interior endpoint the cluster
        holds ``c``, ``c +- sigma k / cluster`` and ``c +- sigma 2^-j`` down to
        ``inner``, where ``sigma`` is the time spent with ``g <= eps_g / 2``.
        The innermost cells are where ``g`` is smallest; ``inner`` stays large
        enough that ``phi`` still changes by several ulps per cell.
        """
        total = self.total_time
        n = max(int(np.ceil(total / dt)), 1)
        uniform = np.linspace(0.0, total, n + 1)
        pt = 1.0 - self.alpha
        # |x - e| <= (eps_g/2)^(1/alpha)  <=>  |t - t_e| <= ((eps_g/2)^(1/alpha))^pt / pt
        sigma = ((0.5 * eps_g) ** (1.0 / self.alpha)) ** pt / pt
        sigma = min(sigma, 0.125 * float(np.min(self._seg_time)))
        centers = self.crossing_time(self.interior_endpoints)
        lin = sigma * np.arange(1, cluster + 1) / cluster
        geo = sigma * 0.5 ** np.arange(1, 64)
        geo = geo[geo >= inner]
        offsets = np.concatenate([[0.0], lin, -lin, geo, -geo])
        clusters = (centers[:, None] + offsets[None, :]).ravel()
        if centers.shape[0]:
            j = np.clip(np.searchsorted(centers, uniform), 0, centers.shape[0] - 1)
            near = np.abs(uniform - centers[j])
            near = np.minimum(near, np.abs(uniform - centers[np.maximum(j - 1, 0)]))
            keep = (near > sigma * (1.0 + 1.0 / cluster)) | (uniform == 0.0) | (uniform == total)
            uniform = uniform[keep]
        grid = np.unique(np.concatenate([uniform, clusters]))
        return grid[(grid >= 0.0) & (grid <= total)]

    def minimal_curve(self, dt, eps_g, **kwargs):
        """The minimal solution sampled on :meth:`minimal_grid`."""
        grid = self.minimal_grid(dt, eps_g, **kwargs)
        return SampledCurve(grid, self.position(grid)[:, None])


def cantor_scenario(depth=6, eps_g=1e-2, eps_d=1e-11):
    """Cantor-like critical set; see :class:`CantorOracle`.

    ``eps_g`` is fixed rather than relative: critical neighbourhoods must hold
    several distinguishable nodes in double precision.  ``eps_d`` is small
    because the curve moves only ``~(eps_g/2)^4`` while crossing such a
    neighbourhood, and distinct nodes there must not count as equal.
    """
    oracle = CantorOracle(depth)

    def energy(x):
        return oracle.phi(x[:, 0])

    def slope(x):
        return oracle.g(x[:, 0])

    A = 1.0 + float(-oracle.phi(1.0))
    problem = FlowProblem(MetricSpace(1), energy, slope, A=A, B=1.0, x_star=[0.0],
                          eps_g=eps_g, eps_d=eps_d, name="cantor")
    sols = {"minimal": lambda t: oracle.position(t)[:, None]}
    return Scenario("cantor", problem, {"depth": int(depth), "eps_g": float(eps_g)}, sols, oracle=oracle)


# ---------------------------------------------------------------------------
# local slope


@dataclass(frozen=True)
class SlopeEstimate:
    """Sampled local slope: ``value`` at the smallest radius, ``values`` per radius."""

    value: float
    radii: tuple
    values: tuple

    @property
    def trend(self):
        return self.values[-1] - self.values[-2] if len(self.values) > 1 else 0.0


def local_slope_estimate(problem: FlowProblem, x, radii, n_dirs=16, seed=0):
    """Estimate ``limsup (phi(x) - phi(y))^+ / d(x, y)`` on spheres of given radii.

    Directions are the coordinate axes (both signs) plus ``n_dirs`` seeded
    random unit vectors when ``d > 1``.
    """
    x = as_point(x, problem.dim)
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be positive and strictly decreasing")
    d = problem.dim
    dirs = np.concatenate([np.eye(d), -np.eye(d)])
    if d > 1 and n_dirs:
        extra = np.random.default_rng(seed).normal(size=(n_dirs, d))
        dirs = np.concatenate([dirs, extra / np.linalg.norm(extra, axis=1, keepdims=True)])
    fx = problem.phi(x[None, :])[0]
    values = []
    for r in radii:
        fy = problem.phi(x[None, :] + r * dirs)
        values.append(float(np.max(np.maximum(fx - fy, 0.0)) / r))
    return SlopeEstimate(values[-1], tuple(radii), tuple(values))


# ---------------------------------------------------------------------------
# registry

SCENARIOS = {
    "quadratic": quadratic_scenario,
    "degenerate": degenerate_power_scenario,
    "degenerate_power": degenerate_power_scenario,
    "cantor": cantor_scenario,
}


def make_scenario(name, **params):
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for scenario {name!r}: {exc}") from None


def scenario_from_config(config):
    """Build a scenario from ``{"name": ..., "params": {...}}``."""
    if not isinstance(config, dict) or "name" not in config:
        raise ConfigError("scenario config needs a 'name' field")
    return make_scenario(config["name"], **dict(config.get("params") or {}))
