"""Minimizing movements: the proximal time-stepping generator of solutions.

Each step minimizes ``phi(y) + |y - x|^2 / (2 tau)``.  In one dimension a
windowed grid search locates the basin and scipy's bounded Brent search
refines it on both neighbouring cells; in ``R^d`` the same line search runs
cyclically over coordinates.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError
from .metric import SampledCurve, as_point
from .problems import FlowProblem

__all__ = ["MMConfig", "mm_convergence_study", "mm_curve", "mm_step", "mm_trajectory"]

_BIG = 1e300


@dataclass(frozen=True)
class MMConfig:
    tau: float
    horizon: float
    x0: tuple
    window_points: int = 201
    xtol: float = 1e-10
    sweeps: int = 50

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("step tau must be positive")
        if not self.horizon >= self.tau:
            raise ConfigError("horizon must be at least one step")
        if self.window_points < 5:
            raise ConfigError("window_points must be at least 5")
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))

    def with_tau(self, tau):
        return MMConfig(tau, self.horizon, self.x0, self.window_points, self.xtol, self.sweeps)


def _line_min(f, center, radius, npts, xtol):
    """Minimize on ``[center - radius, center + radius]``; ``f`` is vectorized."""
    npts += 1 - npts % 2  # odd, so the centre is a grid point
    ys = center + np.linspace(-radius, radius, npts)
    ys[npts // 2] = center
    vals = f(ys)
    k = int(np.argmin(vals))
    best_y, best_v = ys[k], vals[k]
    for a, b in ((max(k - 1, 0), k), (k, min(k + 1, npts - 1))):
        if a == b:
            continue
        res = minimize_scalar(lambda y: min(f(np.array([y]))[0], _BIG), bounds=(ys[a], ys[b]),
                              method="bounded", options={"xatol": xtol})
        if res.fun < best_v:
            best_y, best_v = float(res.x), float(res.fun)
    return best_y, best_v


def mm_step(p: FlowProblem, x, tau, window_points=201, xtol=1e-10, sweeps=50):
    """One proximal step from ``x``.

    Returns ``(y, stationary)``.  The proximal value at ``y`` never exceeds
    ``phi(x)``; when no strict improvement is found ``y = x`` and ``stationary``
    is set.
    """
    x = as_point(x, p.dim)
    phi_x = float(p.phi(x[None, :])[0])
    if not np.isfinite(phi_x):
        raise DomainError("proximal step from a point outside D(phi)")
    inv2tau = 1.0 / (2.0 * tau)

    def prox(ys):
        with np.errstate(invalid="ignore"):
            v = p.phi(ys) + inv2tau * np.sum((ys - x) ** 2, axis=1)
        return np.where(np.isfinite(v), v, np.inf)

    # a minimizer satisfies |y - x|^2 <= 2 tau (phi(x) - inf phi)
    probe = 10.0 * np.sqrt(2.0 * tau)
    samples = x[None, :] + probe * np.concatenate([np.eye(p.dim), -np.eye(p.dim)])
    samples = np.concatenate([samples, x[None, :] + np.linspace(-probe, probe, 41)[:, None] * np.ones(p.dim)])
    vals = p.phi(samples)
    inf_phi = float(np.min(vals[np.isfinite(vals)], initial=phi_x))
    radius = 10.0 * np.sqrt(2.0 * tau * max(phi_x - inf_phi, 1.0))

    y = x.copy()
    best = phi_x
    for _ in range(sweeps if p.dim > 1 else 1):
        moved = 0.0
        for k in range(p.dim):
            def along(s, k=k):
                z = np.repeat(y[None, :], s.shape[0], axis=0)
                z[:, k] = s
                return prox(z)

            s, v = _line_min(along, y[k], radius, window_points, xtol)
            if v < best:
                moved = max(moved, abs(s - y[k]))
                y[k] = s
                best = v
        if moved <= xtol:
            break
    if not best < phi_x:
        return x.copy(), True
    return y, False


def _step_times(tau, horizon):
    n = int(np.floor(horizon / tau + 1e-9))
    times = np.arange(n + 1) * tau
    if horizon - times[-1] > 1e-9 * max(1.0, horizon):
        times = np.append(times, horizon)
    else:
        times[-1] = horizon
    return times


def mm_trajectory(p: FlowProblem, cfg: MMConfig):
    """``(times, points, stationary_flags)`` of the discrete proximal sequence."""
    times = _step_times(cfg.tau, cfg.horizon)
    pts = np.empty((times.shape[0], p.dim))
    pts[0] = as_point(cfg.x0, p.dim)
    flags = np.zeros(times.shape[0], dtype=bool)
    for k in range(1, times.shape[0]):
        pts[k], flags[k] = mm_step(p, pts[k - 1], times[k] - times[k - 1], cfg.window_points, cfg.xtol,
                                   cfg.sweeps)
    return times, pts, flags


def mm_curve(p: FlowProblem, cfg: MMConfig):
    """Piecewise-linear interpolant of the proximal sequence on ``0, tau, ..., horizon``."""
    times, pts, _ = mm_trajectory(p, cfg)
    return SampledCurve(times, pts)


def mm_convergence_study(p: FlowProblem, cfg: MMConfig, levels=3,
                         exact: Optional[Callable[[np.ndarray], np.ndarray]] = None):
    """Sup-errors against ``exact`` at steps ``tau, tau/2, ...``.

    Each row holds ``tau``, ``sup_error`` and ``ratio`` (previous error over this
    one; ``None`` on the first row or when an error vanishes).
    """
    if exact is None:
        raise ConfigError("a convergence study needs an exact solution")
    rows = []
    prev = None
    for lev in range(int(levels)):
        tau = cfg.tau / 2.0**lev
        c = mm_curve(p, cfg.with_tau(tau))
        ref = np.asarray(exact(c.times), dtype=np.float64).reshape(c.points.shape)
        err = float(np.max(np.linalg.norm(c.points - ref, axis=1)))
        ratio = prev / err if prev is not None and err > 0 and prev > 0 else None
        rows.append({"tau": tau, "sup_error": err, "ratio": ratio})
        prev = err
    return rows
