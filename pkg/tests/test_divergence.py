"""Modified chi-square divergence: definitions checked against independent
numerical oracles (grid suprema, finite differences, Fenchel-Young)."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drodoo import ValidationError, as_distribution, divergence_value, modified_chi2

DIV = modified_chi2()


class TestPhi:
    def test_hand_values(self):
        z = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
        expect = 0.5 * (z - 1.0) ** 2
        np.testing.assert_allclose(DIV.phi(z), expect, rtol=0, atol=0)

    def test_curvature_at_one(self):
        assert DIV.phi_double_prime_at_1 == 1.0

    def test_phi_prime_is_derivative(self):
        z = np.linspace(0.05, 4.0, 23)
        h = 1e-6
        fd = (DIV.phi(z + h) - DIV.phi(z - h)) / (2 * h)
        np.testing.assert_allclose(DIV.phi_prime(z), fd, atol=1e-8)

    @given(st.floats(min_value=0.0, max_value=50.0))
    def test_nonnegative_and_zero_at_one(self, z):
        val = float(DIV.phi(np.array([z]))[0])
        assert val >= 0.0
        assert float(DIV.phi(np.array([1.0]))[0]) == 0.0


class TestConjugate:
    def test_closed_form(self):
        zeta = np.array([-3.0, -1.0, -0.5, 0.0, 1.0, 2.5])
        expect = np.where(zeta >= -1.0, zeta + 0.5 * zeta**2, -0.5)
        np.testing.assert_allclose(DIV.conjugate(zeta), expect, rtol=0, atol=0)

    @given(st.floats(min_value=-6.0, max_value=6.0))
    def test_matches_grid_supremum(self, zeta):
        # phi*(zeta) = sup_{z>=0} (z*zeta - phi(z)); brute grid oracle.
        z = np.linspace(0.0, 12.0, 240001)
        oracle = float(np.max(z * zeta - 0.5 * (z - 1.0) ** 2))
        val = float(DIV.conjugate(np.array([zeta]))[0])
        assert val >= oracle - 1e-12
        assert val <= oracle + 1e-8

    def test_prime_is_derivative(self):
        zeta = np.linspace(-0.9, 4.0, 31)
        h = 1e-6
        fd = (DIV.conjugate(zeta + h) - DIV.conjugate(zeta - h)) / (2 * h)
        np.testing.assert_allclose(DIV.conjugate_prime(zeta), fd, atol=1e-8)

    def test_prime_clips_below_minus_one(self):
        zeta = np.array([-5.0, -1.5, -1.0, 0.0, 2.0])
        expect = np.maximum(1.0 + zeta, 0.0)
        np.testing.assert_allclose(DIV.conjugate_prime(zeta), expect, atol=0)

    def test_double_prime_indicator(self):
        assert DIV.conjugate_double_prime is not None
        zeta = np.array([-2.0, -1.0, 0.5])
        np.testing.assert_allclose(
            DIV.conjugate_double_prime(zeta), np.array([0.0, 1.0, 1.0])
        )

    def test_domain_unbounded(self):
        lo, hi = DIV.conjugate_domain
        assert lo == -np.inf and hi == np.inf

    @given(
        st.floats(min_value=0.0, max_value=20.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_fenchel_young(self, z, zeta):
        phi = float(DIV.phi(np.array([z]))[0])
        conj = float(DIV.conjugate(np.array([zeta]))[0])
        assert phi + conj >= z * zeta - 1e-9

    @given(st.floats(min_value=0.0, max_value=20.0))
    def test_fenchel_young_equality_at_gradient(self, z):
        zeta = float(DIV.phi_prime(np.array([z]))[0])
        phi = float(DIV.phi(np.array([z]))[0])
        conj = float(DIV.conjugate(np.array([zeta]))[0])
        assert phi + conj == pytest.approx(z * zeta, abs=1e-9)


class TestDistributionHelpers:
    def test_as_distribution_accepts_and_clips_roundoff(self):
        w = as_distribution([0.25, 0.75])
        np.testing.assert_allclose(w, [0.25, 0.75])
        w = as_distribution([-1e-15, 1.0 + 1e-15])
        assert w[0] == 0.0

    @pytest.mark.parametrize(
        "bad",
        [[-0.1, 1.1], [0.0, 0.0], [np.nan, 1.0], [np.inf, 1.0], [], [1.0, 3.0]],
    )
    def test_as_distribution_rejects(self, bad):
        with pytest.raises(ValidationError):
            as_distribution(bad)

    def test_divergence_zero_iff_equal(self):
        w = np.array([0.2, 0.3, 0.5])
        assert divergence_value(w, w, DIV) == 0.0

    def test_divergence_hand_value(self):
        w = np.array([0.5, 0.5])
        q = np.array([0.25, 0.75])
        # sum_i w_i * phi(q_i/w_i) = 0.5*phi(0.5) + 0.5*phi(1.5) = 0.125
        assert divergence_value(q, w, DIV) == pytest.approx(0.125, abs=1e-15)

    @given(
        st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6),
        st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6),
    )
    def test_divergence_nonnegative(self, a, b):
        k = min(len(a), len(b))
        w = np.asarray(a[:k]) / np.sum(a[:k])
        q = np.asarray(b[:k]) / np.sum(b[:k])
        assert divergence_value(q, w, DIV) >= -1e-15
