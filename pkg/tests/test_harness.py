import json

import numpy as np
import pytest

from lambdaflow.errors import PreconditionError
from lambdaflow.harness import (
    CHECKS,
    AxiomSuiteResult,
    circle_family,
    replay,
    run_c_hypothesis,
    run_existence_checks,
    run_h_axioms,
    run_lyapunov_checks,
    run_minimality_theorems,
)
from lambdaflow.metric import SampledCurve, constant_curve
from lambdaflow.order import truncate
from lambdaflow.problems import (
    degenerate_family,
    degenerate_solution,
    quadratic_scenario,
    quadratic_solution,
    uniform_grid,
)

from conftest import reversed_curve


@pytest.fixture(scope="module")
def quad_family():
    t = uniform_grid(1.0, 1e-3)
    return [SampledCurve(t, quadratic_solution([a], t)) for a in (0.5, 1.0, 2.0)]


@pytest.fixture(scope="module")
def wait_family():
    return degenerate_family([0.0, 0.1, 0.25, 0.5], 1.5, 1e-3)


class TestClosureAxioms:
    def test_quadratic_family(self, quad, quad_family):
        res = run_h_axioms(quad.problem, quad_family, trials=30, seed=0)
        assert res.ok and not res.failed
        assert res.axioms["translation"].passes == 30

    def test_waiting_family(self, degen, wait_family):
        res = run_h_axioms(degen.problem, wait_family, trials=30, seed=1)
        assert not res.failed
        assert res.axioms["concatenation"].passes > 0
        assert "indirectly" in res.axioms["extension"].note

    def test_circle_is_flagged(self):
        res = run_h_axioms(None, circle_family(), trials=5, adversarial=True)
        assert "non_return" in res.failed
        assert res.ok  # adversarial input is expected to fail
        cx = res.axioms["non_return"].counterexamples[0]
        ok, detail = replay(None, circle_family(), cx)
        assert not ok and detail == cx["detail"]

    def test_non_solution_member_rejected(self, quad, quad_family):
        with pytest.raises(PreconditionError):
            run_h_axioms(quad.problem, [reversed_curve(quad_family[0])])

    def test_deterministic(self, degen, wait_family):
        a = run_h_axioms(degen.problem, wait_family, trials=20, seed=7).to_json()
        b = run_h_axioms(degen.problem, wait_family, trials=20, seed=7).to_json()
        assert a == b


class TestCompactness:
    def test_growing_truncations_have_different_ranges(self, degen):
        t = uniform_grid(2.0, 1e-3)
        x0 = SampledCurve(t, degenerate_solution(0.0, t))
        fam = [truncate(x0, T) for T in (1.4, 1.45, 1.49, 1.5)]
        with pytest.raises(PreconditionError):
            run_c_hypothesis(degen.problem, fam, truncate(x0, 1.5))

    def test_constant_family(self, quad):
        fam = [constant_curve([0.0], n=11)] * 3
        res = run_c_hypothesis(quad.problem, fam)
        assert not res.failed

    def test_converging_delays(self, degen):
        t = uniform_grid(2.5, 1e-3)
        fam = [truncate(SampledCurve(t, degenerate_solution(tau, t)), tau + 1.5) for tau in (0.5, 0.3, 0.2, 0.1)]
        limit = truncate(SampledCurve(t, degenerate_solution(0.1, t)), 1.6)
        res = run_c_hypothesis(degen.problem, fam, limit)
        assert not res.failed
        assert res.axioms["pointwise_convergence"].passes == 1

    def test_range_mismatch(self, degen):
        t = uniform_grid(2.0, 1e-3)
        x0 = SampledCurve(t, degenerate_solution(0.0, t))
        with pytest.raises(PreconditionError):
            run_c_hypothesis(degen.problem, [truncate(x0, 1.0), truncate(x0, 1.5)])


class TestLyapunov:
    def test_quadratic(self, quad, quad_family):
        assert not run_lyapunov_checks(quad.problem, quad_family).failed

    def test_waiting(self, degen, wait_family):
        assert not run_lyapunov_checks(degen.problem, wait_family).failed

    def test_flat_energy_mover(self):
        sc = quadratic_scenario(2)
        t = uniform_grid(2.0, 1e-2)
        circle = SampledCurve(t, np.c_[np.cos(t), np.sin(t)])
        res = run_lyapunov_checks(sc.problem, [circle])
        assert set(res.failed) == {"membership", "stationary_when_flat"}


class TestMinimalityTheorems:
    def test_waiting_family(self, degen, wait_family):
        res = run_minimality_theorems(degen.problem, wait_family, {0: True, 1: False, 2: False, 3: False}, trials=20)
        assert not res.failed
        for name in ("uniqueness", "generation", "injectivity", "first_arrival", "segment_time", "closure",
                     "energy_comparison", "criterion_soundness"):
            assert res.axioms[name].passes > 0, name

    def test_equilibrium_singleton(self, quad):
        res = run_minimality_theorems(quad.problem, [constant_curve([0.0], n=11)], {0: True})
        assert not res.failed

    def test_cantor_pair(self, cantor):
        sc, w, _, u = cantor
        res = run_minimality_theorems(sc.problem, [w, u], {0: True, 1: False}, trials=5)
        assert not res.failed
        assert res.axioms["monotone_not_minimal"].passes == 1
        assert res.axioms["uniqueness"].passes == 1


class TestExistence:
    def test_seeded_data(self, quad):
        res = run_existence_checks(quad.problem, [np.array([1.0]), np.array([-2.0])], tau=1e-2)
        assert res.axioms["existence"].passes == 2


class TestResultObject:
    def test_merge_is_additive(self):
        a = AxiomSuiteResult("x", 0)
        a.record("t", True, {})
        b = AxiomSuiteResult("x", 0)
        b.record("t", False, {"k": 1}, "bad")
        a.merge(b)
        assert a.axioms["t"].passes == 1 and a.axioms["t"].fails == 1
        assert a.failed == ["t"] and not a.ok

    def test_json_roundtrip(self, degen, wait_family):
        res = run_h_axioms(degen.problem, wait_family[:2], trials=3)
        d = json.loads(res.to_json())
        assert d["suite"] == "h_axioms" and d["seed"] == 0

    def test_registry(self):
        assert {"translation", "concatenation", "locality", "non_return", "ordering"} <= set(CHECKS)
