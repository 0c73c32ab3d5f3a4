"""Outer optimization over the decision: SAA and the delta-indexed family.

Smooth models are solved through the stacked first-order system in (x, c)

    psi(x, c, Y) = [ u * grad_x f(x, Y) ;  -(phi''(1)/delta) * (u - 1) ],
    u = conj'(-delta * (f(x, Y) + c)),

whose sample mean vanishes at the penalized optimum; the delta -> 0 limit of
the second entry is f + c (a removable singularity, evaluated analytically).
Piecewise-linear scalar models (the order-quantity problem) are solved
exactly at delta = 0 by the critical-quantile rule and at delta != 0 by a
deterministic coarse grid plus golden-section refinement of the dual inner
value, which is concave in x for delta > 0 and empirically unimodal for the
optimistic sign (the grid stage guards against local maxima).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import PhiDivergence, modified_chi2
from .errors import (
    NonConcaveError,
    SolverError,
    UnsupportedModelError,
    ValidationError,
)
from .inner import InnerSolution, dual_inner_from_rewards
from .models import (
    PIECEWISE_LINEAR_SCALAR,
    EmpiricalSample,
    RewardModel,
    as_decision,
)

COARSE_POINTS = 41
REFINE_ITERS = 48
_INV_GOLDEN = 0.6180339887498949
_NEWTON_TOL = 1e-11
_NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one outer solve at a fixed penalty strength."""

    delta: float
    x: np.ndarray
    c: float
    objective: float
    q: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "x": [float(v) for v in np.atleast_1d(self.x)],
            "c": self.c,
            "objective": self.objective,
            "q": [float(v) for v in np.atleast_1d(self.q)],
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "message": self.message,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _conjugate_terms(div: PhiDivergence, zeta: np.ndarray, delta: float):
    """(u, v) = (conj'(zeta), conj''(zeta)); the delta = 0 analytic limit."""
    if delta == 0.0:
        u = np.ones_like(zeta)
        v = np.full_like(zeta, 1.0 / div.phi_double_prime_at_1)
        return u, v
    lo, hi = div.conjugate_domain
    if np.any(zeta < lo) or np.any(zeta > hi):
        raise ValidationError(
            "conjugate argument -delta*(f+c) leaves the divergence domain"
        )
    u = div.conjugate_prime(zeta)
    if div.conjugate_double_prime is None:
        raise UnsupportedModelError(
            "divergence lacks conjugate_double_prime; first-order system "
            "solves and sandwich matrices need it"
        )
    v = div.conjugate_double_prime(zeta)
    return u, v


def psi(model: RewardModel, x, c: float, points, delta: float, div: PhiDivergence):
    """Stacked per-point first-order residuals, shape ``(n, d+1)``."""
    if model.gradient is None:
        raise UnsupportedModelError("psi needs a model gradient")
    x = as_decision(x, model.decision_dim)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    f = model.evaluate(x, pts)
    g = model.gradient(x, pts)
    if delta == 0.0:
        u = np.ones_like(f)
        psi2 = f + c
    else:
        zeta = -delta * (f + c)
        lo, hi = div.conjugate_domain
        if np.any(zeta < lo) or np.any(zeta > hi):
            raise ValidationError(
                "conjugate argument -delta*(f+c) leaves the divergence domain"
            )
        u = div.conjugate_prime(zeta)
        psi2 = -(div.phi_double_prime_at_1 / delta) * (u - 1.0)
    return np.concatenate([u[:, None] * g, psi2[:, None]], axis=1)


def psi_jacobian(
    model: RewardModel, x, c: float, points, delta: float, div: PhiDivergence
):
    """Per-point Jacobian of psi w.r.t. (x, c), shape ``(n, d+1, d+1)``."""
    if model.gradient is None or model.hessian is None:
        raise UnsupportedModelError("psi_jacobian needs gradient and hessian")
    x = as_decision(x, model.decision_dim)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    f = model.evaluate(x, pts)
    g = model.gradient(x, pts)
    h = model.hessian(x, pts)
    zeta = -delta * (f + c)
    u, v = _conjugate_terms(div, zeta, delta)
    n = f.shape[0]
    d = model.decision_dim
    pdd = div.phi_double_prime_at_1
    out = np.empty((n, d + 1, d + 1))
    outer = g[:, :, None] * g[:, None, :]
    out[:, :d, :d] = -delta * v[:, None, None] * outer + u[:, None, None] * h
    out[:, :d, d] = -delta * v[:, None] * g
    out[:, d, :d] = pdd * v[:, None] * g
    out[:, d, d] = pdd * v
    return out


def mean_psi(model, x, c, sample: EmpiricalSample, delta, div):
    return sample.weights @ psi(model, x, c, sample.points, delta, div)


def mean_psi_jacobian(model, x, c, sample: EmpiricalSample, delta, div):
    jac = psi_jacobian(model, x, c, sample.points, delta, div)
    return np.einsum("i,ijk->jk", sample.weights, jac)


def _saa_quantile_order(model: RewardModel, sample: EmpiricalSample) -> float:
    """Exact critical-quantile order: smallest order statistic whose
    cumulative weight reaches the critical ratio."""
    ys = sample.scalar_values()
    order = np.argsort(ys, kind="stable")
    cumw = np.cumsum(sample.weights[order])
    tau = model.params.critical_ratio
    idx = int(np.searchsorted(cumw, tau - 1e-12, side="left"))
    idx = min(idx, len(ys) - 1)
    return float(ys[order[idx]])


def _saa_result(model, sample, x, iterations, residual):
    x = as_decision(x, model.decision_dim)
    f = model.evaluate(x, sample.points)
    obj = float(sample.weights @ f)
    return SolveResult(
        delta=0.0,
        x=x,
        c=-obj,
        objective=obj,
        q=sample.weights.copy(),
        iterations=iterations,
        residual_norm=residual,
        converged=True,
    )


def solve_saa(
    model: RewardModel,
    sample: EmpiricalSample,
    x0=None,
    bracket=None,
    tol: float = 1e-12,
    max_iter: int = _NEWTON_MAX_ITER,
) -> SolveResult:
    """Maximize the sample-mean reward.

    Inventory models use the exact critical-quantile rule; smooth models run
    a damped Newton iteration on the mean gradient (with a negative-definite
    mean-Hessian check); other scalar models fall back to golden-section over
    an explicit ``bracket``.
    """
    if model.kind == "inventory":
        x = _saa_quantile_order(model, sample)
        return _saa_result(model, sample, x, iterations=0, residual=0.0)
    if model.kind == "constant":
        x = np.zeros(model.decision_dim) if x0 is None else as_decision(x0, model.decision_dim)
        return _saa_result(model, sample, x, iterations=0, residual=0.0)
    if model.gradient is not None and model.hessian is not None:
        x = (
            np.zeros(model.decision_dim)
            if x0 is None
            else as_decision(x0, model.decision_dim).copy()
        )
        w = sample.weights
        pts = sample.points
        grad = w @ model.gradient(x, pts)
        iterations = 0
        for _ in range(max_iter):
            ng = float(np.linalg.norm(grad))
            if ng <= tol:
                break
            hess = np.einsum("i,ijk->jk", w, model.hessian(x, pts))
            try:
                dx = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError as exc:
                raise SolverError(
                    "singular mean Hessian in SAA Newton", x=list(x)
                ) from exc
            t = 1.0
            while t >= 1e-10:
                x_try = x + t * dx
                g_try = w @ model.gradient(x_try, pts)
                if np.linalg.norm(g_try) <= (1.0 - 1e-4 * t) * ng:
                    break
                t *= 0.5
            else:
                raise SolverError(
                    "SAA Newton line search stalled", residual=ng, x=list(x)
                )
            x, grad = x_try, g_try
            iterations += 1
        ng = float(np.linalg.norm(grad))
        if ng > max(tol, 1e-9):
            raise SolverError("SAA Newton did not converge", residual=ng, x=list(x))
        hess = np.einsum("i,ijk->jk", w, model.hessian(x, pts))
        top = float(np.linalg.eigvalsh(hess).max())
        if top >= 0.0:
            raise NonConcaveError(
                "mean Hessian is not negative definite at the SAA point",
                top_eigenvalue=top,
            )
        res = _saa_result(model, sample, x, iterations, ng)
        return res
    if model.decision_dim == 1 and bracket is not None:
        lo, hi = float(bracket[0]), float(bracket[1])

        def value_at(xv):
            return float(sample.weights @ model.evaluate(np.array([xv]), sample.points))

        x, _, evals = _grid_golden(value_at, lo, hi, extra=None)
        return _saa_result(model, sample, x, iterations=evals, residual=0.0)
    raise UnsupportedModelError(
        "SAA needs an inventory/constant model, gradient+hessian, or a "
        "scalar bracket"
    )


def _grid_golden(
    value_at, lo, hi, extra=None, refine_iters=REFINE_ITERS, candidates=None
):
    """Deterministic scalar maximization: coarse grid, then golden section.

    ``extra`` adds one candidate (the critical-quantile point);
    ``candidates`` appends further candidates (e.g. sample values, so the
    kink-top maxima of piecewise-linear objectives are never missed).
    Returns (best_x, best_value, evaluation_count); ties at the grid stage
    break toward the earliest candidate.
    """
    if hi < lo:
        lo, hi = hi, lo
    if hi - lo <= 0.0:
        return lo, value_at(lo), 1
    step = (hi - lo) / (COARSE_POINTS - 1)
    cand = [lo + step * j for j in range(COARSE_POINTS)]
    if extra is not None:
        cand.append(float(extra))
    if candidates is not None:
        cand.extend(float(xv) for xv in candidates)
    evals = 0
    best_j = 0
    best_val = -math.inf
    for j, xv in enumerate(cand):
        v = value_at(xv)
        evals += 1
        if v > best_val:
            best_val, best_j = v, j
    best_x = cand[best_j]
    if best_j < COARSE_POINTS:
        a = cand[best_j - 1] if best_j > 0 else lo
        b = cand[best_j + 1] if best_j < COARSE_POINTS - 1 else hi
    else:
        a = max(cand[best_j] - step, lo)
        b = min(cand[best_j] + step, hi)
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1 = value_at(x1)
    f2 = value_at(x2)
    evals += 2
    for probe, val in ((x1, f1), (x2, f2)):
        if val > best_val:
            best_val, best_x = val, probe
    for _ in range(refine_iters):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_GOLDEN * (b - a)
            f1 = value_at(x1)
            probe, val = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_GOLDEN * (b - a)
            f2 = value_at(x2)
            probe, val = x2, f2
        evals += 1
        if val > best_val:
            best_val, best_x = val, probe
    return best_x, best_val, evals


def _newton_joint(model, sample, delta, div, x_init, c_init, tol, max_iter):
    """Damped Newton on the mean psi system; raises SolverError on stall."""
    x = as_decision(x_init, model.decision_dim).copy()
    c = float(c_init)
    F = mean_psi(model, x, c, sample, delta, div)
    iterations = 0
    for _ in range(max_iter):
        nF = float(np.linalg.norm(F))
        if nF <= tol:
            break
        J = mean_psi_jacobian(model, x, c, sample, delta, div)
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                "singular mean psi Jacobian", delta=delta, residual=nF
            ) from exc
        t = 1.0
        while t >= 1e-10:
            x_try = x + t * dz[:-1]
            c_try = c + t * dz[-1]
            F_try = mean_psi(model, x_try, c_try, sample, delta, div)
            if np.linalg.norm(F_try) <= (1.0 - 1e-4 * t) * nF:
                break
            t *= 0.5
        else:
            raise SolverError(
                "joint Newton line search stalled", delta=delta, residual=nF
            )
        x, c, F = x_try, c_try, F_try
        iterations += 1
    nF = float(np.linalg.norm(F))
    if nF > max(tol, 1e-9):
        raise SolverError("joint Newton did not converge", delta=delta, residual=nF)
    return x, c, iterations, nF


def _solve_smooth(model, sample, delta, div, x0, c0, tol, max_iter):
    trace = []
    if x0 is not None and c0 is not None:
        try:
            return _newton_joint(model, sample, delta, div, x0, c0, tol, max_iter)
        except SolverError as exc:
            trace.append(f"warm start failed: {exc}")
    saa = solve_saa(model, sample)
    cur_x, cur_c, cur_delta = saa.x, saa.c, 0.0
    iterations = 0
    stack = [float(delta)]
    splits = 0
    while stack:
        target = stack[-1]
        try:
            cur_x, cur_c, iters, res = _newton_joint(
                model, sample, target, div, cur_x, cur_c, tol, max_iter
            )
            iterations += iters
            cur_delta = target
            stack.pop()
        except SolverError as exc:
            splits += 1
            trace.append(f"delta={target:g}: {exc}")
            if splits > 60 or abs(target - cur_delta) <= 1e-14 * max(1.0, abs(delta)):
                raise SolverError(
                    "homotopy continuation exhausted",
                    delta=delta,
                    trace="; ".join(trace),
                ) from exc
            stack.append(0.5 * (cur_delta + target))
    return cur_x, cur_c, iterations, res


def solve_dro_doo(
    model: RewardModel,
    sample: EmpiricalSample,
    delta: float,
    div: PhiDivergence | None = None,
    x0=None,
    c0: float | None = None,
    bracket=None,
    tol: float = _NEWTON_TOL,
    max_iter: int = _NEWTON_MAX_ITER,
) -> SolveResult:
    """Solve the penalized problem at one delta (robust > 0, optimistic < 0).

    ``delta = 0`` reduces exactly to :func:`solve_saa`.  The reported
    objective and attaining distribution always come from a fresh dual inner
    evaluation at the returned decision.
    """
    div = modified_chi2() if div is None else div
    if not math.isfinite(delta):
        raise ValidationError("delta must be finite")
    if delta == 0.0:
        return solve_saa(model, sample, x0=x0, bracket=bracket)

    if (
        model.smoothness != PIECEWISE_LINEAR_SCALAR
        and model.gradient is not None
        and model.hessian is not None
    ):
        x, c, iterations, res = _solve_smooth(
            model, sample, delta, div, x0, c0, tol, max_iter
        )
        inner_sol = dual_inner_from_rewards(
            model.evaluate(x, sample.points), sample.weights, delta, div
        )
        return SolveResult(
            delta=float(delta),
            x=x,
            c=c,
            objective=inner_sol.value,
            q=inner_sol.q,
            iterations=iterations,
            residual_norm=res,
            converged=True,
        )

    # scalar nonsmooth path
    if model.kind == "constant":
        x = np.zeros(model.decision_dim) if x0 is None else as_decision(x0, model.decision_dim)
        f = model.evaluate(x, sample.points)
        inner_sol = dual_inner_from_rewards(f, sample.weights, delta, div)
        return SolveResult(
            delta=float(delta),
            x=x,
            c=inner_sol.c,
            objective=inner_sol.value,
            q=inner_sol.q,
            iterations=inner_sol.iterations,
            residual_norm=inner_sol.residual,
            converged=True,
        )
    if model.decision_dim != 1:
        raise UnsupportedModelError(
            "nonsmooth solve path needs a scalar decision"
        )
    if model.kind == "inventory":
        ys = sample.scalar_values()
        lo, hi = float(ys.min()), float(ys.max())
        extra = _saa_quantile_order(model, sample)
        kinks = np.sort(ys)
    elif bracket is not None:
        lo, hi = float(bracket[0]), float(bracket[1])
        extra = None
        ys = sample.scalar_values() if sample.dim == 1 else np.empty(0)
        kinks = np.sort(ys[(ys >= lo) & (ys <= hi)])
    else:
        raise UnsupportedModelError(
            "scalar nonsmooth solve needs an inventory model or a bracket"
        )

    pts = sample.points
    w = sample.weights

    def value_at(xv):
        return dual_inner_from_rewards(
            model.evaluate(np.array([xv]), pts), w, delta, div
        ).value

    if delta < 0.0 and model.kind == "inventory":
        # optimistic side: supremum of piecewise-linear concave functions
        # of the order quantity, convex between consecutive sample points,
        # so the maximum is attained exactly at a sample point
        best_x, evals = kinks[0], 0
        best_val = -np.inf
        for xv in kinks:
            v = value_at(float(xv))
            evals += 1
            if v > best_val:
                best_val, best_x = v, float(xv)
    else:
        # robust side is concave (infimum of concave functions); for opaque
        # piecewise-linear models the sample values are offered as extra
        # candidates so kink-top maxima are not missed by the refinement
        candidates = kinks if delta < 0.0 else None
        best_x, _, evals = _grid_golden(
            value_at, lo, hi, extra=extra, candidates=candidates
        )
    inner_sol = dual_inner_from_rewards(
        model.evaluate(np.array([best_x]), pts), w, delta, div
    )
    return SolveResult(
        delta=float(delta),
        x=np.array([best_x]),
        c=inner_sol.c,
        objective=inner_sol.value,
        q=inner_sol.q,
        iterations=evals,
        residual_norm=inner_sol.residual,
        converged=True,
    )


def solve_family(
    model: RewardModel,
    sample: EmpiricalSample,
    deltas,
    div: PhiDivergence | None = None,
    bracket=None,
) -> list[SolveResult]:
    """Solve along a delta grid with warm-start continuation outward from 0.

    Failures at individual grid points are recorded as non-converged entries
    (objective and decision NaN) rather than aborting the sweep.
    """
    div = modified_chi2() if div is None else div
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or deltas.size == 0:
        raise ValidationError("delta grid must be a nonempty 1-D array")
    if not np.all(np.isfinite(deltas)):
        raise ValidationError("delta grid contains non-finite values")
    order = np.argsort(np.abs(deltas), kind="stable")
    results: dict[int, SolveResult] = {}
    warm = {1: (None, None), -1: (None, None)}
    for gi in order:
        delta = float(deltas[gi])
        sign = 1 if delta > 0 else -1
        x0, c0 = (None, None) if delta == 0.0 else warm[sign]
        try:
            res = solve_dro_doo(
                model, sample, delta, div, x0=x0, c0=c0, bracket=bracket
            )
            if delta != 0.0:
                warm[sign] = (res.x, res.c)
        except SolverError as exc:
            res = SolveResult(
                delta=delta,
                x=np.full(model.decision_dim, np.nan),
                c=float("nan"),
                objective=float("nan"),
                q=np.full(sample.n, np.nan),
                iterations=0,
                residual_norm=float("inf"),
                converged=False,
                message=str(exc),
            )
        results[gi] = res
    return [results[i] for i in range(len(deltas))]
