"""Energy dissipation residuals and related runtime checks.

Every check works on grid pairs ``s = t_i <= t = t_j``.  The residual

    R(s, t) = 1/2 int_s^t g(u)^2 + 1/2 int_s^t |u'|^2 - (phi(u(s)) - phi(u(t)))

is additive in ``(s, t)``, so all ``O(N^2)`` pairs are summarized by one
cumulative array and a linear scan for the largest rise (``kernels.max_rise``).
A curve dissipates correctly when no pair has a positive residual beyond the
tolerance; negative residuals are slack.
"""
import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DomainError
from .metric import SampledCurve, metric_speed
from .problems import FlowProblem

__all__ = [
    "EDIReport",
    "GronwallReport",
    "SugReport",
    "ContinuityReport",
    "edi_cumulative",
    "edi_residuals",
    "gronwall_bound",
    "is_solution",
    "phi_continuity_check",
    "richardson_error",
    "sug_check",
]


def _cumtrapz(values, dt):
    return np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * dt)])


def _energies(p: FlowProblem, c: SampledCurve):
    phi = p.phi(c.points)
    bad = ~np.isfinite(phi)
    if np.any(bad):
        i = int(np.argmax(bad))
        if i == 0:
            raise DomainError("initial datum outside D(phi): phi(u(0)) is not finite")
        raise DomainError(f"phi is not finite at node {i} (t = {c.times[i]})")
    return phi


def edi_cumulative(p: FlowProblem, c: SampledCurve):
    """Cumulative residual ``R(0, t_i)``; ``R(t_i, t_j) = out[j] - out[i]``."""
    phi = _energies(p, c)
    g = p.g(c.points)
    dt = np.diff(c.times)
    speed = metric_speed(c, p.space)
    action = _cumtrapz(g * g, dt) + np.concatenate([[0.0], np.cumsum(speed * speed * dt)])
    return 0.5 * action + (phi - phi[0])


def _coarse_index(n):
    idx = np.arange(0, n, 2)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def richardson_error(cumulative, c: SampledCurve):
    """Largest gap between a cumulative quantity on ``c`` and on every other node.

    ``cumulative`` maps a curve to an array over its nodes.  Returns 0 for
    curves too short to coarsen.
    """
    if len(c) < 3:
        return 0.0
    idx = _coarse_index(len(c))
    fine = cumulative(c)[idx]
    coarse = cumulative(SampledCurve(c.times[idx], c.points[idx]))
    return float(np.max(np.abs(fine - coarse)))


def _default_tol(fine, error):
    scale = max(1.0, float(np.max(np.abs(fine))))
    return max(10.0 * error, 1e-12 * scale)


@dataclass
class EDIReport:
    """Residuals of the dissipation inequality over all grid pairs.

    ``cumulative[j] - cumulative[i]`` is the residual of the pair
    ``(times[i], times[j])``.  ``tight`` marks the equality case: every pair
    within the tolerance in absolute value.
    """

    times: np.ndarray
    cumulative: np.ndarray
    max_residual: float
    max_pair: tuple
    min_residual: float
    min_pair: tuple
    tolerance: float
    verdict: str
    tight: bool
    error_estimate: float = 0.0

    @property
    def passed(self):
        return self.verdict == "pass"

    @property
    def max_abs_residual(self):
        return max(abs(self.max_residual), abs(self.min_residual))

    def residual(self, i, j):
        return float(self.cumulative[j] - self.cumulative[i])

    def pairs(self, mode="consecutive"):
        """``(s, t, residual)`` triples.

        ``"consecutive"`` lists neighbouring nodes, ``"anchored"`` pairs every
        node with ``t_0``, ``"all"`` enumerates every ``i <= j`` (quadratic size).
        """
        t, r = self.times, self.cumulative
        if mode == "consecutive":
            return [(t[i], t[i + 1], r[i + 1] - r[i]) for i in range(len(t) - 1)]
        if mode == "anchored":
            return [(t[0], t[j], r[j] - r[0]) for j in range(1, len(t))]
        if mode == "all":
            return [(t[i], t[j], r[j] - r[i]) for i in range(len(t)) for j in range(i, len(t))]
        raise ValueError(f"unknown pair mode {mode!r}")

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "tight": self.tight,
            "tolerance": self.tolerance,
            "error_estimate": self.error_estimate,
            "max_residual": self.max_residual,
            "max_pair": list(self.max_pair),
            "min_residual": self.min_residual,
            "min_pair": list(self.min_pair),
            "n_nodes": int(len(self.times)),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def to_csv(self, mode="consecutive"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "t", "residual"])
        for s, t, r in self.pairs(mode):
            w.writerow([f"{s:.17g}", f"{t:.17g}", f"{r:.17g}"])
        return buf.getvalue()


def edi_residuals(p: FlowProblem, c: SampledCurve, tol: Optional[float] = None):
    """Residual report; ``tol=None`` uses ten times a Richardson error estimate."""
    cum = edi_cumulative(p, c)
    err = richardson_error(lambda curve: edi_cumulative(p, curve), c)
    if tol is None:
        tol = _default_tol(cum, err)
    hi, i, j = kernels.max_rise(cum)
    lo_neg, a, b = kernels.max_rise(-cum)
    lo = -lo_neg
    t = c.times
    passed = hi <= tol
    return EDIReport(
        times=t,
        cumulative=cum,
        max_residual=float(hi),
        max_pair=(float(t[i]), float(t[j])),
        min_residual=float(min(lo, 0.0)),
        min_pair=(float(t[a]), float(t[b])),
        tolerance=float(tol),
        verdict="pass" if passed else "fail",
        tight=bool(passed and -lo <= tol),
        error_estimate=err,
    )


def is_solution(p: FlowProblem, c: SampledCurve, tol: Optional[float] = None):
    """``(ok, report)``: ``ok`` iff no pair violates the dissipation inequality."""
    report = edi_residuals(p, c, tol)
    return report.passed, report


@dataclass
class SugReport:
    passed: bool
    max_excess: float
    pair: tuple
    tolerance: float

    def to_dict(self):
        return {"passed": self.passed, "max_excess": self.max_excess, "pair": list(self.pair),
                "tolerance": self.tolerance}


def _sug_cumulative(p, c):
    g = p.g(c.points)
    speed = metric_speed(c, p.space)
    dt = np.diff(c.times)
    work = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * speed * dt)])
    return _energies(p, c), work


def sug_check(p: FlowProblem, c: SampledCurve, tol: Optional[float] = None):
    """Falsification test of ``|phi(u(t)) - phi(u(s))| <= int_s^t g(u) |u'|``.

    A failure certifies that ``g`` is not a strong upper gradient along ``c``;
    a pass is only evidence.
    """
    phi, work = _sug_cumulative(p, c)
    if tol is None:
        err = richardson_error(lambda curve: _sug_cumulative(p, curve)[1], c)
        tol = _default_tol(work, err)
    up, i1, j1 = kernels.max_rise(phi - work)
    down, i2, j2 = kernels.max_rise(-phi - work)
    t = c.times
    if up >= down:
        excess, pair = up, (float(t[i1]), float(t[j1]))
    else:
        excess, pair = down, (float(t[i2]), float(t[j2]))
    return bool(excess <= tol), SugReport(bool(excess <= tol), float(excess), pair, float(tol))


@dataclass
class GronwallReport:
    passed: bool
    max_ratio: float
    margin: float
    theta: float
    theta_bound: float
    ratios: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"passed": self.passed, "max_ratio": self.max_ratio, "margin": self.margin,
                "theta": self.theta, "theta_bound": self.theta_bound}


def gronwall_bound(p: FlowProblem, c: SampledCurve, theta: Optional[float] = None, tol=1e-12):
    """Check ``xi(t) <= xi(0) (1 + 8Bt e^{8Bt})`` at every node.

    ``xi = phi + 2B d(., x_star)^2 + A``.  The bound is applied pointwise in
    ``t``, which implies the bound at ``theta >= horizon``; the latter value is
    reported too.  ``margin`` is the smallest gap ``bound - xi`` and ``max_ratio``
    the largest ``xi / bound`` after ``t = 0``.
    """
    theta = c.horizon if theta is None else float(theta)
    if theta < c.horizon:
        raise DomainError("theta must be at least the curve horizon")
    B = p.B
    d2 = np.sum((c.points - p.x_star) ** 2, axis=1)
    xi = _energies(p, c) + 2.0 * B * d2 + p.A
    t = c.times
    bound = xi[0] * (1.0 + 8.0 * B * t * np.exp(8.0 * B * t))
    theta_bound = float(xi[0] * (1.0 + 8.0 * B * theta * np.exp(8.0 * B * theta)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bound > 0, xi / bound, np.where(xi <= 0, 0.0, np.inf))
    passed = bool(np.all(xi <= bound + tol) and np.max(xi) <= theta_bound + tol)
    # the ratio is 1 at t = 0 by construction; report the worst later node
    return passed, GronwallReport(passed, float(np.max(ratios[1:])), float(np.min(bound - xi)), theta,
                                  theta_bound, ratios)


@dataclass
class ContinuityReport:
    passed: bool
    worst_index: int
    worst_jump: float
    modulus_constant: float

    def to_dict(self):
        return {"passed": self.passed, "worst_index": self.worst_index, "worst_jump": self.worst_jump,
                "modulus_constant": self.modulus_constant}


def phi_continuity_check(p: FlowProblem, c: SampledCurve, tol=1e-12, modulus=None):
    """Check ``|phi(u(t_{i+1})) - phi(u(t_i))| <= modulus(dt_i) + tol``.

    The default modulus is ``C sqrt(dt)`` with ``C = max g * sqrt(2 (phi_0 -
    min phi))``: along a solution, Cauchy-Schwarz bounds ``int g |u'|`` by
    ``max g * sqrt(dt) * (int |u'|^2)^(1/2)`` and the dissipation inequality
    bounds ``int |u'|^2`` by twice the energy drop.
    """
    phi = _energies(p, c)
    dt = np.diff(c.times)
    const = float("nan")
    if modulus is None:
        const = float(np.max(p.g(c.points)) * np.sqrt(2.0 * max(phi[0] - np.min(phi), 0.0)))
        allowed = const * np.sqrt(dt)
    else:
        allowed = np.asarray([modulus(h) for h in dt], dtype=np.float64)
    jumps = np.abs(np.diff(phi))
    excess = jumps - allowed
    k = int(np.argmax(excess))
    passed = bool(excess[k] <= tol)
    return passed, ContinuityReport(passed, k, float(jumps[k]), const)
