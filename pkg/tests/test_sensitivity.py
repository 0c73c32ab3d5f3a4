"""Worst-case sensitivity: definitional finite-difference limit, closed
forms on hand samples, affine-scaling properties, and the slope of the
sensitivity along the solution path."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drodoo import (
    EmpiricalSample,
    SolverError,
    bias_direction,
    constant_reward,
    frontier,
    modified_chi2,
    quadratic_reward,
    sensitivity_slope,
    solve_dro_doo,
    solve_family,
    worst_case_sensitivity,
)
from drodoo.inner import dual_inner_from_rewards

from conftest import identity_model, uniform_sample

DIV = modified_chi2()


class TestWorstCaseSensitivity:
    def test_two_point_hand_value(self):
        # rewards {0, 2}: variance 1, curvature 1 -> sensitivity 1
        rep = worst_case_sensitivity(
            identity_model(), uniform_sample([0.0, 2.0]), [0.0]
        )
        assert rep.sensitivity == pytest.approx(1.0, abs=1e-12)
        assert rep.mean_reward == pytest.approx(1.0, abs=1e-12)

    def test_constant_reward_is_insensitive(self):
        rep = worst_case_sensitivity(
            constant_reward(4.0), uniform_sample([1.0, 9.0]), [0.0]
        )
        assert rep.sensitivity == 0.0

    @given(
        st.lists(
            st.floats(min_value=-10.0, max_value=10.0), min_size=2, max_size=8
        ),
        st.floats(min_value=0.1, max_value=5.0),
        st.floats(min_value=-5.0, max_value=5.0),
    )
    def test_affine_rescaling(self, vals, a, b):
        values = np.asarray(vals)
        base = worst_case_sensitivity(
            identity_model(), uniform_sample(values), [0.0]
        ).sensitivity
        scaled = worst_case_sensitivity(
            identity_model(), uniform_sample(a * values + b), [0.0]
        ).sensitivity
        assert scaled == pytest.approx(a * a * base, rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
    def test_matches_definitional_limit(self, eps):
        # S = lim (mean - worst_value(eps))/eps where worst_value(eps)
        # is the inner minimum at penalty 1/eps... realized here through
        # the dual at delta = eps
        rng = np.random.default_rng(31)
        values = rng.normal(0.0, 2.0, 12)
        sample = uniform_sample(values)
        rep = worst_case_sensitivity(identity_model(), sample, [0.0])
        sol = dual_inner_from_rewards(values, sample.weights, eps, DIV)
        fd = (values.mean() - sol.value) / eps
        # first-order agreement: the error is itself O(eps)
        assert fd == pytest.approx(rep.sensitivity, abs=3.0 * eps * rep.sensitivity)

    def test_definitional_error_shrinks_linearly(self):
        rng = np.random.default_rng(77)
        values = rng.normal(1.0, 3.0, 9)
        sample = uniform_sample(values)
        rep = worst_case_sensitivity(identity_model(), sample, [0.0])
        errs = []
        for eps in (1e-2, 1e-3):
            sol = dual_inner_from_rewards(values, sample.weights, eps, DIV)
            errs.append(abs((values.mean() - sol.value) / eps - rep.sensitivity))
        assert errs[1] <= errs[0] * 0.2  # ~10x shrink expected, allow slack


class TestSensitivitySlope:
    def test_skewed_sample_hand_value(self):
        model = quadratic_reward()
        sample = uniform_sample([0.0, 0.0, 3.0])
        summary = bias_direction(model, sample, [1.0])
        assert sensitivity_slope(summary) == pytest.approx(-2.0, abs=1e-12)

    def test_zero_beta_gives_zero_slope(self):
        model = quadratic_reward()
        summary = bias_direction(model, uniform_sample([-1.0, 1.0]), [0.0])
        assert sensitivity_slope(summary) == 0.0

    def test_always_negative_when_beta_nonzero(self):
        rng = np.random.default_rng(4)
        model = quadratic_reward()
        for _ in range(20):
            values = rng.normal(0.0, 1.5, 7)
            sample = uniform_sample(values)
            x0 = solve_dro_doo(model, sample, 0.0).x
            summary = bias_direction(model, sample, x0)
            if np.any(np.abs(summary.beta) > 1e-9):
                assert sensitivity_slope(summary) < 0.0

    def test_matches_finite_difference_along_path(self):
        model = quadratic_reward()
        sample = uniform_sample([0.0, 0.0, 3.0])
        x0 = solve_dro_doo(model, sample, 0.0).x
        summary = bias_direction(model, sample, x0)
        slope = sensitivity_slope(summary)
        h = 1e-3
        vals = {}
        for delta in (h, -h):
            res = solve_dro_doo(model, sample, delta)
            vals[delta] = worst_case_sensitivity(
                model, sample, res.x, delta_tag=delta
            ).sensitivity
        fd = (vals[h] - vals[-h]) / (2 * h)
        assert fd == pytest.approx(slope, rel=1e-2)


class TestFrontier:
    def test_sorted_and_anchored_at_zero(self):
        model = quadratic_reward()
        sample = uniform_sample([0.0, 1.0, 4.0])
        grid = np.array([0.1, -0.1, 0.0, 0.05])
        fam = solve_family(model, sample, grid)
        reports = frontier(model, sample, fam)
        ds = [r.delta for r in reports]
        assert ds == sorted(ds)
        zero = next(r for r in reports if r.delta == 0.0)
        direct = worst_case_sensitivity(
            model, sample, solve_dro_doo(model, sample, 0.0).x
        )
        assert zero.sensitivity == pytest.approx(direct.sensitivity, abs=1e-10)

    def test_skips_failed_solves(self):
        model = quadratic_reward()
        sample = uniform_sample([0.0, 1.0, 4.0])
        fam = solve_family(model, sample, [0.0, 0.05])
        broken = [fam[0], fam[1].__class__(**{**fam[1].__dict__, "converged": False})]
        reports = frontier(model, sample, broken)
        assert [r.delta for r in reports] == [0.0]

    def test_sensitivity_declines_toward_robust_side(self):
        # positive-skew sample: the robust solution shrinks the variance,
        # so sensitivity decreases as delta grows through zero
        model = quadratic_reward()
        sample = uniform_sample([0.0, 0.0, 0.5, 3.0])
        grid = np.linspace(-0.2, 0.2, 9)
        fam = solve_family(model, sample, grid)
        reports = frontier(model, sample, fam)
        sens = [r.sensitivity for r in reports]
        assert all(a >= b - 1e-12 for a, b in zip(sens, sens[1:]))
