"""Property suites over families of sampled solutions.

Every sub-test is a named check ``(problem, family, params) -> (ok, detail)``.
Randomized sub-tests draw their ``params`` from one seeded generator and
record them with each failure, so :func:`replay` reruns a counterexample
exactly.  Results serialize to JSON with sorted keys, so equal seeds give
byte-identical output.
"""
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import kernels
from .dissipation import is_solution
from .errors import LambdaFlowError, PreconditionError
from .metric import SampledCurve, curve_distance, rho, t_star
from .mm import MMConfig, mm_curve
from .order import (
    check_non_return,
    concatenate,
    critical_time_measure,
    extract_minimal,
    is_minimal,
    min_separation,
    precedes,
    psi_compare,
    ranges_match,
    restrict,
    translate,
)
from .problems import FlowProblem

__all__ = [
    "AxiomOutcome",
    "AxiomSuiteResult",
    "CHECKS",
    "circle_family",
    "replay",
    "run_c_hypothesis",
    "run_existence_checks",
    "run_h_axioms",
    "run_lyapunov_checks",
    "run_minimality_theorems",
]

ASSUMED = "lower semicontinuity of phi and g is assumed, not checked"


@dataclass
class AxiomOutcome:
    passes: int = 0
    fails: int = 0
    counterexamples: List[dict] = field(default_factory=list)
    note: str = ""

    def to_dict(self):
        return {"passes": self.passes, "fails": self.fails, "counterexamples": self.counterexamples,
                "note": self.note}


@dataclass
class AxiomSuiteResult:
    suite: str
    seed: Optional[int]
    adversarial: bool = False
    axioms: Dict[str, AxiomOutcome] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def outcome(self, name):
        return self.axioms.setdefault(name, AxiomOutcome())

    def record(self, name, ok, params, detail=""):
        out = self.outcome(name)
        if ok:
            out.passes += 1
        else:
            out.fails += 1
            out.counterexamples.append({"check": name, "params": params, "detail": detail})

    @property
    def failed(self):
        return sorted(k for k, v in self.axioms.items() if v.fails)

    @property
    def ok(self):
        """True unless a sub-test fails on input that was not marked adversarial."""
        return self.adversarial or not self.failed

    def merge(self, other):
        for name, out in other.axioms.items():
            mine = self.outcome(name)
            mine.passes += out.passes
            mine.fails += out.fails
            mine.counterexamples.extend(out.counterexamples)
            mine.note = mine.note or out.note
        self.notes.extend(n for n in other.notes if n not in self.notes)
        return self

    def to_dict(self):
        return {
            "suite": self.suite,
            "seed": self.seed,
            "adversarial": self.adversarial,
            "ok": self.ok,
            "axioms": {k: v.to_dict() for k, v in sorted(self.axioms.items())},
            "notes": list(self.notes),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def circle_family(radius=1.0, phases=(0.0, 0.5, 1.0), turns=2, nodes_per_turn=400):
    """Rotations ``t -> r (cos(t + a), sin(t + a))``; periodic, hence never solutions.

    The grid is aligned with the period so that returns land on nodes.
    """
    n = int(turns * nodes_per_turn)
    t = np.linspace(0.0, 2.0 * np.pi * turns, n + 1)
    return [SampledCurve(t, radius * np.c_[np.cos(t + a), np.sin(t + a)]) for a in phases]


# ---------------------------------------------------------------------------
# helpers


def _tol(p, c):
    """EDI tolerance of a family member: its own default estimate."""
    return is_solution(p, c)[1].tolerance


def _member_tols(p, family):
    return [_tol(p, c) for c in family]


def _step(c):
    return float(np.max(np.diff(c.times)))


def _pick_node(rng, c, lo=0, hi=None):
    hi = len(c) - 1 if hi is None else hi
    return int(rng.integers(lo, max(hi, lo + 1)))


# ---------------------------------------------------------------------------
# checks; each returns (ok, detail)


def _check_translation(p, family, params):
    c = family[params["member"]]
    shifted = translate(c, c.times[params["node"]])
    ok, rep = is_solution(p, shifted, params["tol"])
    return ok, f"max residual {rep.max_residual:.3g}"


def _check_concatenation(p, family, params):
    u = family[params["first"]]
    v = family[params["second"]]
    t_bar = float(u.times[params["node"]])
    if params["shift"] > 0:
        v = translate(v, params["shift"])
    w = concatenate(u, v, t_bar, p.space, p.eps_d)
    ok, rep = is_solution(p, w, params["tol"])
    return ok, f"max residual {rep.max_residual:.3g}"


def _check_locality(p, family, params):
    c = family[params["member"]]
    T = float(c.times[params["node"]])
    rebuilt = concatenate(restrict(c, T), translate(c, T), T, p.space, p.eps_d)
    same = curve_distance(rebuilt, c) <= p.eps_d
    ok, rep = is_solution(p, rebuilt, params["tol"])
    return ok and same, f"round trip distance ok: {same}; max residual {rep.max_residual:.3g}"


def _check_non_return(p, family, params):
    c = family[params["member"]]
    eps = params.get("eps_d", p.eps_d if p is not None else 1e-6)
    rep = check_non_return(c, None, eps)
    if rep.passed:
        return True, ""
    return False, f"returns at t={rep.back} to the point of t={rep.first} after leaving it at t={rep.away}"


def _check_ordering(p, family, params):
    """Shared range must be traversed in the same order by both curves."""
    u = family[params["first"]]
    v = family[params["second"]]
    eps = params.get("eps_d", p.eps_d if p is not None else 1e-6)
    arrive = kernels.leftmost_match(v.points, u.points, u.times, eps)
    seen = np.isfinite(arrive)
    if seen.sum() < 2:
        return True, "no shared points"
    r = arrive[seen]
    back, i, j = kernels.max_rise(-r)
    ok = back <= 2.0 * _step(u)
    return ok, "" if ok else f"order reversed by {back:.3g} in time"


def _check_extension(p, family, params):
    c = family[params["member"]]
    w, _ = extract_minimal(p, c, params["tol"])
    ok, rep = is_solution(p, w, params["tol"])
    return ok, f"max residual {rep.max_residual:.3g}"


def _check_membership(p, family, params):
    ok, rep = is_solution(p, family[params["member"]], params.get("tol"))
    return ok, f"max residual {rep.max_residual:.3g} (tol {rep.tolerance:.3g})"


def _check_energy_decay(p, family, params):
    phi = p.phi(family[params["member"]].points)
    rise = float(np.max(np.diff(phi), initial=0.0))
    return rise <= params["tol"], f"largest energy increase {rise:.3g}"


def _check_stationary(p, family, params):
    """Wherever phi o u is flat, u must not move."""
    c = family[params["member"]]
    phi = p.phi(c.points)
    flat = np.abs(np.diff(phi)) <= params["tol"]
    k = 0
    n = flat.shape[0]
    while k < n:
        if not flat[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and flat[j + 1]:
            j += 1
        spread = float(np.max(np.linalg.norm(c.points[k:j + 2] - c.points[k], axis=1)))
        # a solution can still creep by sqrt(2 * drop * length) (Cauchy-Schwarz)
        drop = abs(float(phi[k] - phi[j + 1])) + params["tol"]
        allowed = p.eps_d + np.sqrt(2.0 * drop * (c.times[j + 1] - c.times[k]))
        if spread > allowed:
            return False, f"energy flat on [{c.times[k]:.6g}, {c.times[j + 1]:.6g}] but curve moves {spread:.3g}"
        k = j + 1
    return True, ""


CHECKS = {
    "translation": _check_translation,
    "concatenation": _check_concatenation,
    "locality": _check_locality,
    "non_return": _check_non_return,
    "ordering": _check_ordering,
    "extension": _check_extension,
    "membership": _check_membership,
    "energy_decay": _check_energy_decay,
    "stationary_when_flat": _check_stationary,
}


def replay(p, family, counterexample):
    """Rerun a recorded counterexample; returns the fresh ``(ok, detail)``."""
    return CHECKS[counterexample["check"]](p, family, counterexample["params"])


def _run(result, p, family, name, params):
    try:
        ok, detail = CHECKS[name](p, family, params)
    except LambdaFlowError as exc:
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    result.record(name, ok, params, detail)
    return ok


# ---------------------------------------------------------------------------
# suites


def _require_members(p, family, adversarial):
    tols = []
    bad = []
    for i, c in enumerate(family):
        ok, rep = is_solution(p, c)
        tols.append(rep.tolerance)
        if not ok:
            bad.append(i)
    if bad and not adversarial:
        raise PreconditionError(f"family members {bad} do not satisfy the dissipation inequality")
    return tols, bad


def run_h_axioms(p: Optional[FlowProblem], family, trials=100, seed=0, adversarial=False):
    """Translation, concatenation, non-return/ordering, locality and extension.

    ``p=None`` runs only the geometric sub-tests (non-return and ordering),
    which need no energy.  ``adversarial=True`` marks input expected to fail;
    members outside the solution class are then reported instead of rejected.
    """
    family = list(family)
    if not family:
        raise PreconditionError("empty family")
    rng = np.random.default_rng(seed)
    res = AxiomSuiteResult("h_axioms", seed, adversarial)
    eps = p.eps_d if p is not None else 1e-6
    for i in range(len(family)):
        _run(res, p, family, "non_return", {"member": i, "eps_d": eps})
    for i in range(len(family)):
        for j in range(len(family)):
            if i != j:
                _run(res, p, family, "ordering", {"first": i, "second": j, "eps_d": eps})
    if p is None:
        res.notes.append("no energy given: closure sub-tests skipped")
        return res
    tols, bad = _require_members(p, family, adversarial)
    for i in bad:
        res.record("membership", False, {"member": i, "tol": tols[i]}, "not a solution")
    good = [i for i in range(len(family)) if i not in bad]
    if not good:
        return res
    for _ in range(int(trials)):
        i = int(rng.choice(good))
        c = family[i]
        _run(res, p, family, "translation", {"member": i, "node": _pick_node(rng, c, 0, len(c) - 2),
                                             "tol": tols[i]})
        i = int(rng.choice(good))
        j = int(rng.choice(good))
        u, v = family[i], family[j]
        node = _pick_node(rng, u, 1, len(u) - 1)
        shift = 0.0
        first = kernels.node_match_bounds(u.points[node:node + 1], v.points, v.times, eps)[0][0]
        if not np.isfinite(first) or first >= v.horizon:
            j, v = i, u
            first = float(u.times[node]) if node < len(u) - 1 else np.nan
        if np.isfinite(first):
            shift = float(first)
            _run(res, p, family, "concatenation", {"first": i, "second": j, "node": node, "shift": shift,
                                                   "tol": max(tols[i], tols[j])})
        i = int(rng.choice(good))
        c = family[i]
        _run(res, p, family, "locality", {"member": i, "node": _pick_node(rng, c, 1, len(c) - 2),
                                          "tol": tols[i]})
    for i in good:
        _run(res, p, family, "extension", {"member": i, "tol": tols[i]})
    res.outcome("extension").note = "exercised indirectly: frozen-tail path of minimal extraction"
    res.notes.append(ASSUMED)
    return res


def run_existence_checks(p: FlowProblem, x0s, tau=1e-2, horizon=1.0, seed=0):
    """Each seeded initial datum yields a minimizing-movement curve in the solution class."""
    res = AxiomSuiteResult("existence", seed)
    for x0 in x0s:
        c = mm_curve(p, MMConfig(tau, horizon, x0))
        ok, rep = is_solution(p, c)
        res.record("existence", ok, {"x0": list(np.atleast_1d(x0).astype(float)), "tau": tau},
                   f"max residual {rep.max_residual:.3g}")
    res.outcome("existence").note = "relative to the tested initial data only"
    return res


def run_c_hypothesis(p: FlowProblem, family, limit: Optional[SampledCurve] = None, tol=None, seed=None):
    """Finite-family shadow of the compactness hypothesis for truncated curves.

    Members must share one range and freeze in finite time.  Without
    ``limit`` the last member stands in for the accumulation point.  The
    freeze time of the limit must not exceed the smallest freeze time over the
    second half of the family (the tail) by more than ``tol``.
    """
    family = list(family)
    if not family:
        raise PreconditionError("empty family")
    for i, c in enumerate(family[1:], 1):
        if not ranges_match(family[0], c, p.eps_d):
            raise PreconditionError(f"member {i} does not share the range of member 0")
    res = AxiomSuiteResult("c_hypothesis", seed)
    rhos = [rho(c, p.space, p.eps_d) for c in family]
    frozen = [r < c.horizon or len(c) == 2 for r, c in zip(rhos, family)]
    res.record("bounded_freeze_time", all(frozen), {"rho": rhos},
               "" if all(frozen) else "some member never freezes on its horizon")
    cand = family[-1] if limit is None else limit
    tol = 2.0 * max(_step(c) for c in family) if tol is None else float(tol)
    # a truncated curve solves the flow up to its freeze time
    r_lim = rho(cand, p.space, p.eps_d)
    moving = restrict(cand, r_lim) if r_lim > 0 else cand
    ok, rep = is_solution(p, moving)
    res.record("limit_is_solution", ok, {}, f"max residual {rep.max_residual:.3g}")
    same = ranges_match(family[0], cand, p.eps_d)
    res.record("limit_range", same, {}, "" if same else "limit range differs")
    tail = rhos[len(rhos) // 2:]
    ok = r_lim <= min(tail) + tol
    res.record("freeze_time_lsc", ok, {"rho_limit": r_lim, "tail_min": min(tail), "tol": tol},
               "" if ok else "freeze time jumps up in the limit")
    if limit is not None:
        dists = [curve_distance(c, limit) for c in family]
        ok = dists[-1] <= dists[0] + tol
        res.record("pointwise_convergence", ok, {"distances": dists},
                   "" if ok else "family does not approach the limit")
    res.notes.append("finite families only: a sampled stand-in that is weaker than the sequential statement")
    res.notes.append(ASSUMED)
    return res


def run_lyapunov_checks(p: FlowProblem, family, tol=None, seed=None):
    """Energy never increases, and a flat energy stretch means a resting curve.

    Members are not required to be solutions; their membership is reported
    alongside so that energy-flat movers show up as both failures.
    """
    res = AxiomSuiteResult("lyapunov", seed)
    for i, c in enumerate(family):
        phi = p.phi(c.points)
        t = 1e-12 * max(1.0, float(np.max(np.abs(phi)))) if tol is None else float(tol)
        _run(res, p, family, "membership", {"member": i})
        _run(res, p, family, "energy_decay", {"member": i, "tol": t})
        _run(res, p, family, "stationary_when_flat", {"member": i, "tol": t})
    return res


def run_minimality_theorems(p: FlowProblem, family, labels=None, trials=20, seed=0, tol=None):
    """Structure of minimal solutions on a family sharing one range.

    Sub-tests: uniqueness of the extracted curve, every member precedes it,
    it is injective before freezing, it arrives first, it crosses every
    segment fastest, translates and self-concatenations stay minimal, it has
    the lowest energy at every time, and the minimality verdict agrees with
    ``labels`` (index -> bool) including members with strictly decreasing
    energy that are not minimal.
    """
    family = list(family)
    if not family:
        raise PreconditionError("empty family")
    rng = np.random.default_rng(seed)
    res = AxiomSuiteResult("minimality", seed)
    tols, bad = _require_members(p, family, False)
    step = max(_step(c) for c in family)
    tol = 10.0 * step if tol is None else float(tol)
    mins = [extract_minimal(p, c, t)[0] for c, t in zip(family, tols)]
    w = mins[0]
    w_tol = _tol(p, w)

    for i, m in enumerate(mins[1:], 1):
        d = curve_distance(w, m)
        res.record("uniqueness", d <= tol, {"member": i}, f"distance {d:.3g}")
    for i, (c, m) in enumerate(zip(family, mins)):
        ok = precedes(c, m, p.space, p.eps_d)
        res.record("generation", ok, {"member": i}, "" if ok else "no reparametrization onto the minimal curve")

    for i, m in enumerate(mins):
        ts = t_star(m, p.space, p.eps_d)
        k = int(np.searchsorted(m.times, ts))
        d, a, b = min_separation(m.points[: k + 1]) if k >= 1 else (np.inf, -1, -1)
        res.record("injectivity", d > p.eps_d, {"member": i},
                   "" if d > p.eps_d else f"nodes at t={m.times[a]:.6g} and t={m.times[b]:.6g} coincide")

    ts = t_star(w, p.space, p.eps_d)
    for i, v in enumerate(family):
        arrive = kernels.leftmost_match(w.points, v.points, v.times, p.eps_d)
        seen = np.isfinite(arrive)
        late = np.minimum(w.times, ts)[seen] - arrive[seen]
        worst = float(np.max(late, initial=-np.inf))
        res.record("first_arrival", worst <= 2.0 * step, {"member": i}, f"largest lead {worst:.3g}")

    for _ in range(int(trials)):
        i = int(rng.integers(len(family)))
        v = family[i]
        a, b = sorted(int(x) for x in rng.integers(0, len(w), size=2))
        if a == b:
            continue
        pts = w.points[[a, b]]
        t1 = kernels.leftmost_match(pts[1:], v.points, v.times, p.eps_d)[0]
        if not np.isfinite(t1):
            continue
        inside = v.times <= t1
        last = kernels.node_match_bounds(pts[:1], v.points[inside], v.times[inside], p.eps_d)[1][0]
        s1 = kernels.leftmost_match(pts[:1], v.points, v.times, p.eps_d)[0] if not np.isfinite(last) else last
        lhs = min(float(w.times[b]), ts) - float(w.times[a])
        res.record("segment_time", lhs <= t1 - s1 + 2.0 * step, {"member": i, "nodes": [a, b]},
                   f"minimal {lhs:.6g} vs member {t1 - s1:.6g}")

    for _ in range(int(trials)):
        if len(w) < 3:
            break
        k = int(rng.integers(1, len(w) - 1))
        shifted = translate(w, w.times[k])
        rep = critical_time_measure(p, shifted)
        res.record("closure", rep.critical_measure <= 2.0 * step and is_solution(p, shifted, w_tol)[0],
                   {"translate_node": k}, f"critical measure {rep.critical_measure:.3g}")
        joined = concatenate(restrict(w, w.times[k]), translate(w, w.times[k]), w.times[k], p.space, p.eps_d)
        rep = critical_time_measure(p, joined)
        res.record("closure", rep.critical_measure <= 2.0 * step and is_solution(p, joined, w_tol)[0],
                   {"concatenate_node": k}, f"critical measure {rep.critical_measure:.3g}")

    for i, v in enumerate(family):
        try:
            rep = psi_compare(p, w, v)
        except PreconditionError:
            res.outcome("energy_comparison").note = "members with a different range skipped"
            continue
        res.record("energy_comparison", rep.passed, {"member": i},
                   "" if rep.passed else f"minimal curve has higher energy at t={rep.first_violation}")

    for i, m in enumerate(mins):
        rep = is_minimal(p, m, 2.0 * step, _tol(p, m))
        res.record("criterion_soundness", rep.verdict == "minimal", {"extracted_from": i}, rep.verdict)
    for i, expected in sorted((labels or {}).items()):
        rep = is_minimal(p, family[i], 2.0 * step, tols[i])
        got = rep.verdict == "minimal"
        res.record("criterion_soundness", got == bool(expected), {"member": i}, rep.verdict)
        strict = bool(np.all(np.diff(p.phi(family[i].points)) < 0))
        if strict and not expected:
            res.record("monotone_not_minimal", not got, {"member": i}, rep.verdict)
    if "monotone_not_minimal" not in res.axioms:
        res.outcome("monotone_not_minimal").note = "no labelled non-minimal member with strictly decreasing energy"
    res.notes.append("verdicts assume g is a strong upper gradient")
    return res
