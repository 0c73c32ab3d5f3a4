"""Worst-case sensitivity of a decision and the mean-sensitivity frontier.

For a smooth divergence the sensitivity of a decision x is the rate at which
the in-sample expected reward deteriorates under an infinitesimal adversarial
reweighting of the sample; it collapses to the in-sample reward variance
scaled by 1/phi''(1).  Along the solution family x_n(delta) it moves linearly
in delta to first order, with slope 2 beta' Hbar^{-1} beta / phi''(1)^2 — a
strictly negative number whenever beta != 0, which is the robust/optimistic
trade-off: a positive delta buys lower sensitivity, a negative delta higher
in-sample reward with higher sensitivity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .asymptotics import ExpansionSummary
from .divergence import PhiDivergence, modified_chi2
from .errors import SolverError
from .models import EmpiricalSample, RewardModel, as_decision
from .solver import SolveResult


@dataclass(frozen=True)
class SensitivityReport:
    """Worst-case sensitivity and in-sample mean of one decision."""

    sensitivity: float
    mean_reward: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "mean_reward": self.mean_reward,
            "delta": self.delta,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def worst_case_sensitivity(
    model: RewardModel,
    sample: EmpiricalSample,
    x,
    div: PhiDivergence | None = None,
    delta_tag: float = 0.0,
) -> SensitivityReport:
    """Sensitivity of decision ``x``: in-sample reward variance / phi''(1)."""
    div = modified_chi2() if div is None else div
    x = as_decision(x, model.decision_dim)
    f = model.evaluate(x, sample.points)
    w = sample.weights
    mean = float(w @ f)
    var = float(w @ (f - mean) ** 2)
    return SensitivityReport(
        sensitivity=var / div.phi_double_prime_at_1,
        mean_reward=mean,
        delta=float(delta_tag),
    )


def sensitivity_slope(summary: ExpansionSummary) -> float:
    """d/d delta of the family sensitivity at delta = 0.

    Equals ``2 beta' Hbar^{-1} beta / phi''(1)^2``; strictly negative when
    ``beta != 0`` because the mean Hessian of a concave model is negative
    definite.
    """
    beta = summary.beta
    if not np.any(beta):
        return 0.0
    try:
        sol = np.linalg.solve(summary.hessian_mean, beta)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular mean Hessian in sensitivity slope") from exc
    return float(2.0 * (beta @ sol) / summary.phi_dd**2)


def frontier(
    model: RewardModel,
    sample: EmpiricalSample,
    family: list[SolveResult],
    div: PhiDivergence | None = None,
) -> list[SensitivityReport]:
    """Per-delta (mean reward, sensitivity) points for a solved family.

    Non-converged family entries are skipped; the result is sorted by delta.
    """
    div = modified_chi2() if div is None else div
    points = [
        worst_case_sensitivity(model, sample, res.x, div, delta_tag=res.delta)
        for res in family
        if res.converged
    ]
    return sorted(points, key=lambda rep: rep.delta)
