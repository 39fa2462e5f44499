import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambdaflow.dissipation import (
    edi_residuals,
    gronwall_bound,
    is_solution,
    phi_continuity_check,
    sug_check,
)
from lambdaflow.errors import DomainError
from lambdaflow.metric import MetricSpace, SampledCurve, constant_curve
from lambdaflow.order import concatenate, restrict, translate
from lambdaflow.problems import FlowProblem, uniform_grid

from conftest import reversed_curve


class TestResiduals:
    def test_exponential_is_tight(self, quad, exp_curve):
        rep = edi_residuals(quad.problem, exp_curve)
        assert rep.max_abs_residual <= 1e-5
        # each integral and the energy drop equal (1 - e^-2) / 4
        assert abs(rep.residual(0, len(exp_curve) - 1)) <= 1e-5
        assert rep.passed and rep.tight

    def test_equilibrium(self, quad):
        rep = edi_residuals(quad.problem, constant_curve([0.0], n=11))
        assert rep.max_residual == 0.0 and rep.min_residual == 0.0

    def test_waiting_interval(self, degen, x_tau):
        rep = edi_residuals(degen.problem, x_tau[0.5])
        assert rep.residual(0, 500) == 0.0
        assert rep.residual(100, 400) == 0.0

    def test_domain_violation(self, degen):
        with pytest.raises(DomainError, match="initial datum"):
            edi_residuals(degen.problem, SampledCurve([0.0, 1.0], [-1.0, 0.0]))

    def test_pairs_and_serialization(self, quad, exp_curve):
        rep = edi_residuals(quad.problem, restrict(exp_curve, 0.01))
        assert len(rep.pairs("consecutive")) == 10
        assert len(rep.pairs("anchored")) == 10
        assert len(rep.pairs("all")) == 66
        assert json.loads(rep.to_json())["verdict"] == "pass"
        lines = rep.to_csv().splitlines()
        assert lines[0] == "s,t,residual" and len(lines) == 11
        with pytest.raises(ValueError):
            rep.pairs("bogus")

    def test_additivity(self, degen, x_tau):
        rep = edi_residuals(degen.problem, x_tau[0.25])
        for s, t, u in [(0, 300, 1500), (10, 11, 12), (700, 900, 2000)]:
            assert rep.residual(s, u) == pytest.approx(rep.residual(s, t) + rep.residual(t, u), abs=1e-13)

    def test_translation_matches_shifted_subreport(self, quad, exp_curve):
        full = edi_residuals(quad.problem, exp_curve, tol=1e-5)
        part = edi_residuals(quad.problem, translate(exp_curve, exp_curve.times[300]), tol=1e-5)
        for i, j in [(0, 10), (5, 700), (0, 700)]:
            assert part.residual(i, j) == pytest.approx(full.residual(300 + i, 300 + j), abs=1e-14)

    def test_concatenation_splits(self, quad, exp_curve):
        u = restrict(exp_curve, exp_curve.times[400])
        v = translate(exp_curve, exp_curve.times[400])
        w = concatenate(u, v, u.horizon, eps_d=1e-12)
        rw = edi_residuals(quad.problem, w, tol=1e-5)
        ru = edi_residuals(quad.problem, u, tol=1e-5)
        rv = edi_residuals(quad.problem, v, tol=1e-5)
        n = len(u) - 1
        assert rw.residual(0, len(w) - 1) == pytest.approx(
            ru.residual(0, n) + rv.residual(0, len(v) - 1), abs=1e-13)
        assert is_solution(quad.problem, w)[0]


class TestIsSolution:
    def test_exponential(self, quad, exp_curve):
        assert is_solution(quad.problem, exp_curve)[0]

    def test_reversed_exponential_fails(self, quad, exp_curve):
        ok, rep = is_solution(quad.problem, reversed_curve(exp_curve))
        assert not ok and rep.verdict == "fail"
        assert rep.max_residual > 0.1

    @pytest.mark.parametrize("rate", [0.5, 2.0])
    def test_wrong_speed_fails(self, quad, rate):
        # off the flow, Young's inequality is strict: the residual is positive
        t = uniform_grid(1.0, 1e-3)
        ok, rep = is_solution(quad.problem, SampledCurve(t, np.exp(-rate * t)))
        assert not ok and rep.max_residual > 1e-2

    def test_spare_energy_drop_passes(self):
        # with g = 0 the inequality leaves room: negative residuals are slack
        p = FlowProblem(MetricSpace(1), lambda x: -x[:, 0], lambda x: np.zeros(x.shape[0]))
        t = uniform_grid(1.0, 0.01)
        ok, rep = is_solution(p, SampledCurve(t, 0.5 * t))
        assert ok and not rep.tight
        assert rep.residual(0, len(t) - 1) == pytest.approx(0.125 - 0.5)

    @pytest.mark.parametrize("tau", [0.0, 0.1, 0.25, 0.5])
    def test_waiting_solutions(self, degen, x_tau, tau):
        assert is_solution(degen.problem, x_tau[tau])[0]

    @settings(max_examples=20)
    @given(st.floats(0.1, 3.0), st.integers(200, 2000))
    def test_exponentials_pass_for_any_start(self, quad, x0, n):
        t = np.linspace(0.0, 1.0, n + 1)
        assert is_solution(quad.problem, SampledCurve(t, x0 * np.exp(-t)))[0]


class TestUpperGradient:
    def test_exponential(self, quad, exp_curve):
        ok, rep = sug_check(quad.problem, exp_curve)
        assert ok and rep.max_excess <= 1e-6

    def test_zero_gradient_moving_curve_fails(self):
        p = FlowProblem(MetricSpace(1), lambda x: -x[:, 0], lambda x: np.zeros(x.shape[0]))
        t = uniform_grid(1.0, 0.01)
        assert not sug_check(p, SampledCurve(t, t))[0]

    def test_constant(self, quad):
        assert sug_check(quad.problem, constant_curve([2.0]))[0]


class TestGronwall:
    def test_equilibrium(self, quad):
        ok, rep = gronwall_bound(quad.problem, constant_curve([0.0], n=5))
        assert ok and rep.max_ratio <= 1.0

    def test_exponential(self, quad, exp_curve):
        ok, rep = gronwall_bound(quad.problem, exp_curve)
        assert ok and rep.max_ratio < 1.0 and rep.margin >= 0.0

    def test_runaway_curve_fails(self, quad):
        t = uniform_grid(1.0, 0.01)
        ok, rep = gronwall_bound(quad.problem, SampledCurve(t, 1e4 * t**2))
        assert not ok and rep.max_ratio > 1.0

    def test_theta_below_horizon(self, quad, exp_curve):
        with pytest.raises(DomainError):
            gronwall_bound(quad.problem, exp_curve, theta=0.5)


class TestContinuity:
    def test_exponential(self, quad, exp_curve):
        assert phi_continuity_check(quad.problem, exp_curve)[0]

    def test_jump_fails(self, quad):
        t = uniform_grid(1.0, 0.01)
        x = np.exp(-t)
        x[50:] -= 0.5
        ok, rep = phi_continuity_check(quad.problem, SampledCurve(t, x))
        assert not ok and rep.worst_index == 49

    def test_constant(self, quad):
        assert phi_continuity_check(quad.problem, constant_curve([1.0], n=5))[0]

    def test_custom_modulus(self, quad, exp_curve):
        assert not phi_continuity_check(quad.problem, exp_curve, modulus=lambda h: 0.0)[0]
