"""First-order expansion and asymptotic covariance of the penalized solution.

Three pieces, all for smooth models:

* the bias direction pi = (1/phi''(1)) * Hbar^{-1} Cov[grad f, f], the
  first-order displacement of the optimizer per unit of penalty strength;
* the sandwich covariance V = A^{-1} B A^{-T} of the stacked system, with
  A the mean Jacobian of psi and B the mean outer product, carved into the
  decision block xi, the cross block kappa, and the scalar eta;
* the out-of-sample slope rho = d/d delta tr{xi(delta) * E[hess f]} at 0,
  estimated by central finite differences with Richardson extrapolation,
  which feeds the optimal penalty strength delta_n = -(1/2n) * phi''(1)^2 *
  rho / (pi' Hbar pi) and its predicted out-of-sample improvement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .divergence import PhiDivergence, modified_chi2
from .errors import SolverError, ValidationError
from .models import EmpiricalSample, RewardModel, as_decision, reward_statistics
from .solver import (
    mean_psi_jacobian,
    psi,
    solve_dro_doo,
    solve_saa,
)

_FD_STEP = 1e-3


@dataclass(frozen=True)
class ExpansionSummary:
    """Ingredients and result of the first-order bias expansion."""

    pi: np.ndarray
    hessian_mean: np.ndarray
    cov_grad_reward: np.ndarray
    phi_dd: float

    @property
    def beta(self) -> np.ndarray:
        """The sensitivity vector; identical to ``cov_grad_reward``."""
        return self.cov_grad_reward

    def to_dict(self) -> dict:
        return {
            "pi": [float(v) for v in self.pi],
            "beta": [float(v) for v in self.beta],
            "hessian_mean": [[float(v) for v in row] for row in self.hessian_mean],
            "cov_grad_reward": [float(v) for v in self.cov_grad_reward],
            "phi_dd": self.phi_dd,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class SandwichCovariance:
    """A^{-1} B A^{-T} and its blocks for the stacked (x, c) system."""

    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    xi: np.ndarray
    kappa: np.ndarray
    eta: float

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "V": self.V.tolist(),
            "xi": self.xi.tolist(),
            "kappa": [float(v) for v in self.kappa],
            "eta": self.eta,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class RhoEstimate:
    """Finite-difference estimate of the out-of-sample slope rho.

    ``rho`` is the Richardson extrapolation of the central differences at
    ``step`` and ``step/2``; ``trace_term`` freezes the Hessian argument at
    the delta=0 optimizer (so ``shift_term = rho - trace_term`` is the part
    due to the optimizer moving), reported for diagnostics only.
    ``trace_at_zero`` is tr{xi(0) E[hess f]}, the Jensen-gap trace.
    """

    rho: float
    rho_step: float
    rho_halfstep: float
    step: float
    trace_at_zero: float
    trace_term: float
    shift_term: float

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "rho_step": self.rho_step,
            "rho_halfstep": self.rho_halfstep,
            "step": self.step,
            "trace_at_zero": self.trace_at_zero,
            "trace_term": self.trace_term,
            "shift_term": self.shift_term,
        }


@dataclass(frozen=True)
class OptimalDelta:
    """Optimal penalty strength and its predicted improvement over delta=0."""

    delta_n: float
    improvement: float

    def to_dict(self) -> dict:
        return {"delta_n": self.delta_n, "improvement": self.improvement}


def bias_direction(
    model: RewardModel,
    sample: EmpiricalSample,
    x0,
    div: PhiDivergence | None = None,
) -> ExpansionSummary:
    """First-order bias direction at the delta=0 optimizer ``x0``."""
    div = modified_chi2() if div is None else div
    x0 = as_decision(x0, model.decision_dim)
    stats = reward_statistics(model, sample, x0)
    cov = stats.cov_grad_reward
    hbar = stats.hessian_mean
    # the direction solves Hbar pi = beta / phi''(1); a singular Hessian has
    # no unique solution even for beta = 0, so reject it up front
    if not np.all(np.isfinite(hbar)) or np.linalg.cond(hbar) > 1e12:
        raise SolverError("singular mean Hessian in bias direction")
    if not np.any(cov):
        # zero covariance forces pi = 0 once the Hessian is invertible
        pi = np.zeros(model.decision_dim)
    else:
        try:
            pi = np.linalg.solve(hbar, cov) / div.phi_double_prime_at_1
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular mean Hessian in bias direction") from exc
    return ExpansionSummary(
        pi=pi,
        hessian_mean=hbar,
        cov_grad_reward=cov,
        phi_dd=div.phi_double_prime_at_1,
    )


def sandwich_covariance(
    model: RewardModel,
    sample: EmpiricalSample,
    x_star,
    c_star: float,
    delta: float,
    div: PhiDivergence | None = None,
) -> SandwichCovariance:
    """Asymptotic covariance of the stacked solution at ``(x_star, c_star)``."""
    div = modified_chi2() if div is None else div
    x_star = as_decision(x_star, model.decision_dim)
    w = sample.weights
    vals = psi(model, x_star, c_star, sample.points, delta, div)
    B = np.einsum("i,ij,ik->jk", w, vals, vals)
    A = mean_psi_jacobian(model, x_star, c_star, sample, delta, div)
    try:
        a_inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SolverError("mean psi Jacobian is singular", delta=delta) from exc
    V = a_inv @ B @ a_inv.T
    V = 0.5 * (V + V.T)
    d = model.decision_dim
    return SandwichCovariance(
        A=A, B=B, V=V, xi=V[:d, :d], kappa=V[:d, d], eta=float(V[d, d])
    )


def _trace_at(model, population, delta, div, hess_at=None):
    """tr{xi(delta) * E[hess f(x, .)]} along the population solution path.

    ``hess_at`` freezes the Hessian argument at a fixed decision; by default
    the Hessian is evaluated at the solution for this delta.
    """
    res = solve_dro_doo(model, population, delta, div)
    cov = sandwich_covariance(model, population, res.x, res.c, delta, div)
    x_h = res.x if hess_at is None else as_decision(hess_at, model.decision_dim)
    hbar = np.einsum(
        "i,ijk->jk", population.weights, model.hessian(x_h, population.points)
    )
    return float(np.trace(cov.xi @ hbar))


def rho_estimate(
    model: RewardModel,
    population: EmpiricalSample,
    div: PhiDivergence | None = None,
    step: float = _FD_STEP,
) -> RhoEstimate:
    """Central-difference estimate of rho on a population-level sample.

    ``population`` stands in for the data-generating distribution (a
    quadrature grid or a large Monte-Carlo draw with weights).
    """
    div = modified_chi2() if div is None else div
    if model.hessian is None:
        raise ValidationError("rho estimation needs a model Hessian")
    x0 = solve_saa(model, population).x

    def central(h, hess_at=None):
        up = _trace_at(model, population, h, div, hess_at)
        dn = _trace_at(model, population, -h, div, hess_at)
        return (up - dn) / (2.0 * h)

    rho_step = central(step)
    rho_half = central(0.5 * step)
    rho = (4.0 * rho_half - rho_step) / 3.0
    trace_step = central(step, hess_at=x0)
    trace_half = central(0.5 * step, hess_at=x0)
    trace_term = (4.0 * trace_half - trace_step) / 3.0
    trace_at_zero = _trace_at(model, population, 0.0, div)
    return RhoEstimate(
        rho=rho,
        rho_step=rho_step,
        rho_halfstep=rho_half,
        step=step,
        trace_at_zero=trace_at_zero,
        trace_term=trace_term,
        shift_term=rho - trace_term,
    )


def optimal_delta(summary: ExpansionSummary, rho: float, n: int) -> OptimalDelta:
    """Penalty strength minimizing the out-of-sample loss to first order.

    ``delta_n = -(1/2n) phi''(1)^2 rho / (pi' Hbar pi)``; the predicted
    improvement over delta=0 is ``-(1/4n^2) phi''(1)^2 rho^2 / (pi' Hbar
    pi)``, positive because the quadratic form is negative for concave
    models.  Shares rho's sign since the quadratic form flips the leading
    minus.
    """
    if n < 1:
        raise ValidationError("need n >= 1")
    pi = summary.pi
    # reject a bias direction that is zero at working precision: the
    # quadratic form in the denominator scales with ||pi||^2, so the formula
    # degenerates rather than failing loudly
    hnorm = float(np.linalg.norm(summary.hessian_mean, 2))
    if not np.any(pi) or float(pi @ pi) * hnorm <= 1e-18 * (1.0 + hnorm):
        raise ValidationError("no first-order bias; formula inapplicable")
    quad = float(pi @ summary.hessian_mean @ pi)
    if quad >= 0.0:
        raise SolverError(
            "quadratic form pi' Hbar pi is not negative", quad=quad
        )
    scale = summary.phi_dd**2
    delta_n = -scale * rho / (2.0 * n * quad)
    improvement = -scale * rho * rho / (4.0 * n * n * quad)
    return OptimalDelta(delta_n=delta_n, improvement=improvement)
