"""Reward models, demand law, and population moments, each checked against
an independent oracle (hand values, Monte Carlo, dense grids, or quadrature
identities)."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drodoo import (
    DemandMixtureParams,
    EmpiricalSample,
    InventoryParams,
    ValidationError,
    constant_reward,
    demand_moments,
    demand_quantile,
    gauss_hermite_population,
    gauss_laguerre_population,
    inventory_reward,
    models,
    population_optimal_order,
    population_reward_moments,
    quadratic_reward,
    reward_statistics,
    sample_demand_values,
)

PAPER_DEMAND = DemandMixtureParams(m=250.0, mu1=10.0, mu2=60.0, p=0.9)
PAPER_INV = InventoryParams(r=10.0, c=9.0, s=0.0, q=0.0)


def _mc_demand(params, n, seed=123):
    rng = np.random.default_rng(seed)
    branch = rng.random(n) < params.p
    up = rng.exponential(params.mu1, n)
    down = rng.exponential(params.mu2, n)
    return np.maximum(params.m + np.where(branch, up, -down), 0.0)


class TestEmpiricalSample:
    def test_from_values_uniform_weights(self):
        s = EmpiricalSample.from_values([3.0, 1.0, 2.0])
        assert s.n == 3 and s.dim == 1
        np.testing.assert_allclose(s.weights, np.full(3, 1 / 3))
        np.testing.assert_allclose(s.scalar_values(), [3.0, 1.0, 2.0])

    def test_rejects_bad_weights(self):
        pts = np.zeros((2, 1))
        with pytest.raises(ValidationError):
            EmpiricalSample(pts, np.array([0.7, 0.7]))
        with pytest.raises(ValidationError):
            EmpiricalSample(pts, np.array([-0.5, 1.5]))
        with pytest.raises(ValidationError):
            EmpiricalSample(pts, np.array([0.5, 0.25, 0.25]))

    def test_csv_round_trip(self, tmp_path):
        s = EmpiricalSample(
            np.array([[1.5, -2.0], [0.25, 4.0]]), np.array([0.125, 0.875])
        )
        path = tmp_path / "sample.csv"
        s.to_csv(path)
        back = EmpiricalSample.from_csv(path)
        np.testing.assert_array_equal(back.points, s.points)
        np.testing.assert_array_equal(back.weights, s.weights)

    def test_json_round_trip(self):
        s = EmpiricalSample.from_values([1.0, 2.0, 3.0])
        back = EmpiricalSample.from_json(s.to_json())
        np.testing.assert_array_equal(back.points, s.points)
        np.testing.assert_array_equal(back.weights, s.weights)


class TestInventoryReward:
    def test_hand_values(self):
        model = inventory_reward(PAPER_INV)
        Y = np.array([[10.0], [5.0]])
        x = np.array([5.0])
        # order 5, demand 10: sell 5 at 10, paid 45 -> 5
        assert model.rewards(x, Y)[0] == pytest.approx(5.0)
        x = np.array([10.0])
        # order 10, demand 5: sell 5 at 10, paid 90 -> -40
        assert model.rewards(x, Y)[1] == pytest.approx(-40.0)

    def test_salvage_and_shortage_terms(self):
        inv = InventoryParams(r=4.0, c=1.0, s=0.5, q=0.25)
        model = inventory_reward(inv)
        # x=2, Y=5: sales 8, cost 2, shortage 0.5*3 -> 4.5
        assert model.rewards(np.array([2.0]), np.array([[5.0]]))[0] == pytest.approx(
            4.5
        )
        # x=5, Y=2: sales 8, cost 5, salvage 0.25*3 -> 3.75
        assert model.rewards(np.array([5.0]), np.array([[2.0]]))[0] == pytest.approx(
            3.75
        )

    def test_critical_ratio(self):
        assert PAPER_INV.critical_ratio == pytest.approx(0.1)
        inv = InventoryParams(r=4.0, c=1.0, s=0.5, q=0.25)
        assert inv.critical_ratio == pytest.approx(3.5 / 4.25)

    @given(
        st.floats(min_value=0.0, max_value=50.0),
        st.floats(min_value=0.0, max_value=50.0),
    )
    def test_concave_piecewise_structure(self, x, y):
        model = inventory_reward(PAPER_INV)
        got = model.rewards(np.array([x]), np.array([[y]]))[0]
        r, c = PAPER_INV.r, PAPER_INV.c
        direct = r * min(x, y) - c * x
        assert got == pytest.approx(direct, abs=1e-9)


class TestDemandLaw:
    def test_sampling_deterministic(self):
        a = sample_demand_values(PAPER_DEMAND, 100, seed=7)
        b = sample_demand_values(PAPER_DEMAND, 100, seed=7)
        np.testing.assert_array_equal(a, b)
        c = sample_demand_values(PAPER_DEMAND, 100, seed=8)
        assert not np.array_equal(a, c)

    def test_sampling_nonnegative(self):
        y = sample_demand_values(PAPER_DEMAND, 20000, seed=1)
        assert np.all(y >= 0.0)

    def test_moments_match_monte_carlo(self):
        mean, sd = demand_moments(PAPER_DEMAND)
        y = _mc_demand(PAPER_DEMAND, 400_000)
        se_mean = y.std(ddof=1) / np.sqrt(y.size)
        assert mean == pytest.approx(y.mean(), abs=4 * se_mean)
        # SE of the sd via the delta method on the variance
        dev = y - y.mean()
        se_var = np.sqrt(np.var(dev**2, ddof=1) / y.size)
        se_sd = se_var / (2 * sd)
        assert sd == pytest.approx(y.std(ddof=1), abs=4 * se_sd)

    def test_reference_moments(self):
        mean, sd = demand_moments(PAPER_DEMAND)
        assert mean == pytest.approx(253.09, abs=0.05)
        assert sd == pytest.approx(28.9, abs=0.2)

    def test_quantile_at_critical_ratio_is_mode(self):
        # P(Y < m) = (1-p) exactly (the clipped left branch stays below m),
        # so the 0.1-quantile sits at the mixture kink m = 250.
        assert demand_quantile(PAPER_DEMAND, 0.1) == pytest.approx(250.0, abs=1e-9)

    @pytest.mark.parametrize("tau", [0.05, 0.1, 0.3, 0.5, 0.9, 0.99])
    def test_quantile_matches_empirical(self, tau):
        y = _mc_demand(PAPER_DEMAND, 400_000)
        q = demand_quantile(PAPER_DEMAND, tau)
        lo, hi = np.quantile(y, [max(tau - 0.004, 0.0), min(tau + 0.004, 1.0)])
        assert lo - 1e-9 <= q <= hi + 1e-9

    @given(st.floats(min_value=0.01, max_value=0.99))
    def test_quantile_inverts_cdf(self, tau):
        q = demand_quantile(PAPER_DEMAND, tau)
        p = PAPER_DEMAND
        # direct CDF of the clipped mixture
        if q <= 0:
            cdf = 0.0
        elif q < p.m:
            cdf = (1 - p.p) * np.exp(-(p.m - q) / p.mu2)
        else:
            cdf = (1 - p.p) + p.p * (1 - np.exp(-(q - p.m) / p.mu1))
        assert cdf == pytest.approx(tau, abs=1e-9)


class TestPopulationMoments:
    @pytest.mark.parametrize("x", [200.0, 240.0, 250.0, 262.0, 320.0])
    def test_reward_moments_match_monte_carlo(self, x):
        y = _mc_demand(PAPER_DEMAND, 400_000)
        r, c = PAPER_INV.r, PAPER_INV.c
        f = r * np.minimum(x, y) - c * x
        mean, var = population_reward_moments(PAPER_INV, PAPER_DEMAND, x)
        se_mean = f.std(ddof=1) / np.sqrt(f.size)
        assert mean == pytest.approx(f.mean(), abs=4 * se_mean)
        dev = f - f.mean()
        se_var = np.sqrt(np.var(dev**2, ddof=1) / f.size)
        assert var == pytest.approx(f.var(ddof=1), abs=4 * se_var)

    def test_optimal_order_is_critical_quantile(self):
        x_star, v_star = population_optimal_order(PAPER_INV, PAPER_DEMAND)
        assert x_star == pytest.approx(250.0, abs=1e-6)
        mean, _ = population_reward_moments(PAPER_INV, PAPER_DEMAND, x_star)
        assert v_star == pytest.approx(mean, abs=1e-9)

    def test_optimal_order_beats_grid(self):
        x_star, v_star = population_optimal_order(PAPER_INV, PAPER_DEMAND)
        for x in np.linspace(150.0, 400.0, 501):
            mean, _ = population_reward_moments(PAPER_INV, PAPER_DEMAND, float(x))
            assert v_star >= mean - 1e-9

    def test_reference_population_value(self):
        _, v_star = population_optimal_order(PAPER_INV, PAPER_DEMAND)
        assert v_star == pytest.approx(190.93, abs=0.05)


class TestSmoothModels:
    @given(
        st.floats(min_value=-5.0, max_value=5.0),
        st.lists(
            st.floats(min_value=-5.0, max_value=5.0), min_size=2, max_size=6
        ),
    )
    def test_quadratic_derivatives_match_fd(self, x, ys):
        model = quadratic_reward()
        xv = np.array([x])
        Y = np.asarray(ys)[:, None]
        h = 1e-6
        up = model.rewards(xv + h, Y)
        dn = model.rewards(xv - h, Y)
        fd_grad = (up - dn) / (2 * h)
        np.testing.assert_allclose(
            np.asarray(model.gradient(xv, Y))[:, 0], fd_grad, atol=1e-6
        )
        # wider step for the second difference: the model is exactly
        # quadratic, so there is no truncation error to worry about
        h2 = 1e-3
        up2 = model.rewards(xv + h2, Y)
        dn2 = model.rewards(xv - h2, Y)
        fd_hess = (up2 - 2 * model.rewards(xv, Y) + dn2) / h2**2
        np.testing.assert_allclose(
            np.asarray(model.hessian(xv, Y))[:, 0, 0], fd_hess, atol=1e-6
        )

    def test_quadratic_values(self):
        model = quadratic_reward()
        got = model.rewards(np.array([2.0]), np.array([[0.0], [2.0], [5.0]]))
        np.testing.assert_allclose(got, [-2.0, 0.0, -4.5])

    def test_constant_reward(self):
        model = constant_reward(3.5)
        Y = np.array([[1.0], [2.0]])
        np.testing.assert_allclose(model.rewards(np.array([0.0]), Y), [3.5, 3.5])
        # no derivative callables: the constant model rides the scalar
        # search path rather than the stationarity system
        assert model.gradient is None and model.hessian is None

    def test_reward_statistics_against_numpy(self):
        rng = np.random.default_rng(5)
        values = rng.normal(1.0, 2.0, 9)
        w = rng.dirichlet(np.ones(9))
        sample = EmpiricalSample(values[:, None], w)
        model = quadratic_reward()
        x = np.array([0.7])
        stats = reward_statistics(model, sample, x)
        f = model.rewards(x, sample.points)
        g = np.asarray(model.gradient(x, sample.points))[:, 0]
        mean = float(w @ f)
        assert stats.mean == pytest.approx(mean, abs=1e-12)
        assert stats.variance == pytest.approx(float(w @ (f - mean) ** 2), abs=1e-12)
        assert stats.grad_mean[0] == pytest.approx(float(w @ g), abs=1e-12)
        assert stats.hessian_mean[0, 0] == pytest.approx(-1.0, abs=1e-12)
        cov = float(w @ ((g - w @ g) * (f - mean)))
        assert stats.cov_grad_reward[0] == pytest.approx(cov, abs=1e-12)


class TestQuadraturePopulations:
    def test_gauss_hermite_matches_normal_moments(self):
        mu, sd = 1.25, 1.75
        pop = gauss_hermite_population(mu, sd, nodes=101)
        y = pop.scalar_values()
        w = pop.weights
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        m1 = float(w @ y)
        assert m1 == pytest.approx(mu, abs=1e-10)
        c2 = float(w @ (y - m1) ** 2)
        c3 = float(w @ (y - m1) ** 3)
        c4 = float(w @ (y - m1) ** 4)
        assert c2 == pytest.approx(sd**2, abs=1e-9)
        assert c3 == pytest.approx(0.0, abs=1e-9)
        assert c4 == pytest.approx(3 * sd**4, abs=1e-7)

    def test_gauss_laguerre_matches_exponential_moments(self):
        scale = 1.5
        pop = gauss_laguerre_population(scale, nodes=151)
        y = pop.scalar_values()
        w = pop.weights
        m1 = float(w @ y)
        assert m1 == pytest.approx(scale, abs=1e-9)
        c2 = float(w @ (y - m1) ** 2)
        c3 = float(w @ (y - m1) ** 3)
        assert c2 == pytest.approx(scale**2, abs=1e-8)
        assert c3 == pytest.approx(2 * scale**3, abs=1e-7)
