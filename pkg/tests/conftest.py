"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from drodoo import (
    DemandMixtureParams,
    EmpiricalSample,
    InventoryParams,
    RewardModel,
    modified_chi2,
)

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def chi2():
    return modified_chi2()


@pytest.fixture(scope="session")
def demand_params():
    return DemandMixtureParams(m=250.0, mu1=10.0, mu2=60.0, p=0.9)


@pytest.fixture(scope="session")
def inventory_params():
    return InventoryParams(r=10.0, c=9.0, s=0.0, q=0.0)


def identity_model() -> RewardModel:
    """Scalar model whose reward is the observation itself (decision-free)."""

    return RewardModel(
        decision_dim=1,
        evaluate=lambda x, Y: Y[:, 0].copy(),
        gradient=lambda x, Y: np.zeros((Y.shape[0], 1)),
        hessian=lambda x, Y: np.zeros((Y.shape[0], 1, 1)),
    )


def uniform_sample(values) -> EmpiricalSample:
    return EmpiricalSample.from_values(np.asarray(values, dtype=float))


def quadratic_solution_closed_form(values: np.ndarray, delta: float) -> float:
    """Penalized solution of the quadratic model on a sample, assuming the
    reweighting never clips: ybar + delta*g3 / (2*(1 + delta*s2)) with g3 the
    central third moment and s2 the (biased) variance."""

    y = np.asarray(values, dtype=float)
    ybar = y.mean()
    dev = y - ybar
    s2 = float(np.mean(dev**2))
    g3 = float(np.mean(dev**3))
    return float(ybar + delta * g3 / (2.0 * (1.0 + delta * s2)))
