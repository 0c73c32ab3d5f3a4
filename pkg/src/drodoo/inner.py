"""Inner reweighting problem: worst-case (robust) and best-case (optimistic) tilts.

For a penalty level ``delta`` and rewards ``f_i`` under base weights ``p_i``,
the inner value is

    min_Q  sum q_i f_i + (1/delta) * sum p_i phi(q_i / p_i)      (delta > 0)
    max_Q  sum q_i f_i + (1/delta) * sum p_i phi(q_i / p_i)      (delta < 0)

over probability vectors ``Q``.  Its scalar dual is solved here: find ``c``
with ``sum_i p_i * conj'( -delta * (f_i + c) ) = 1``; the optimizer is
recovered as ``q_i = p_i * conj'(-delta * (f_i + c))`` and the value equals
``-(1/delta) * sum p_i conj(-delta (f_i + c)) - c``.

``primal_inner_brute_force`` solves the same problem directly on the simplex
(projected gradient plus pairwise exchange polish) and deliberately shares no
code with the dual path; it is the oracle the dual is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergence import PhiDivergence
from .errors import InnerUnboundedError, SolverError, ValidationError
from .models import EmpiricalSample, RewardModel, as_decision

__all__ = [
    "InnerSolution",
    "dual_inner_value",
    "dual_inner_from_rewards",
    "primal_inner_brute_force",
    "tilted_distribution_chi2",
    "sensitivity_distribution",
]

_C_TOL = 1e-12
_C_MAX_ITER = 100


@dataclass(frozen=True)
class InnerSolution:
    """Solved inner problem: multiplier, value, tilted weights, diagnostics.

    ``residual`` is ``|sum q - 1|`` at the returned multiplier.  ``c`` is NaN
    when produced by the primal oracle (no multiplier there).
    """

    c: float
    value: float
    q: np.ndarray
    active_clip: bool
    iterations: int
    residual: float


def _check_delta(delta: float) -> float:
    d = float(delta)
    if not math.isfinite(d) or d == 0.0:
        raise ValidationError("delta must be finite and nonzero")
    return d


def dual_inner_value(
    model: RewardModel,
    sample: EmpiricalSample,
    x,
    delta: float,
    div: PhiDivergence,
) -> InnerSolution:
    """Inner value at decision ``x`` via the scalar dual."""
    xv = as_decision(x, model.decision_dim)
    f = model.rewards(xv, sample.points)
    return dual_inner_from_rewards(f, sample.weights, delta, div)


def dual_inner_from_rewards(
    f: np.ndarray, weights: np.ndarray, delta: float, div: PhiDivergence
) -> InnerSolution:
    """Solve the scalar dual given precomputed rewards.

    Safeguarded Newton inside a sign-changing bracket; bisection steps when a
    Newton step leaves the bracket or no conjugate curvature is available.
    """
    delta = _check_delta(delta)
    f = np.asarray(f, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.shape != w.shape or f.ndim != 1:
        raise ValidationError("rewards and weights must be matching 1-d arrays")
    if not np.all(np.isfinite(f)):
        raise ValidationError("rewards contain non-finite values")

    lo_dom, hi_dom = div.conjugate_domain

    def h(c: float) -> float:
        return float(w @ div.conjugate_prime(-delta * (f + c))) - 1.0

    # c-range keeping every conjugate argument inside its domain
    f_min, f_max = float(f.min()), float(f.max())
    margin = 1e-12 * max(1.0, abs(f_min), abs(f_max))
    if delta > 0:
        c_lo = -np.inf if np.isinf(hi_dom) else -hi_dom / delta - f_min + margin
        c_hi = np.inf if np.isinf(lo_dom) else -lo_dom / delta - f_max - margin
    else:
        c_lo = -np.inf if np.isinf(lo_dom) else -lo_dom / delta - f_min + margin
        c_hi = np.inf if np.isinf(hi_dom) else -hi_dom / delta - f_max - margin
    if not c_lo < c_hi:
        raise InnerUnboundedError(
            "conjugate domain admits no feasible multiplier",
            delta=delta,
            c_lo=c_lo,
            c_hi=c_hi,
        )

    # h is monotone in c (direction set by the sign of delta); expand a bracket
    c0 = float(np.clip(-(w @ f), c_lo, c_hi))
    if not np.isfinite(c0):
        c0 = 0.0 if c_lo < 0.0 < c_hi else (c_lo + c_hi) / 2.0
    h0 = h(c0)
    a = b = c0
    ha = hb = h0
    step = max(1.0, abs(c0)) * 0.5
    grow_iters = 0
    # h is decreasing in c for delta > 0 and increasing for delta < 0, so the
    # root lies in the direction that drives h toward zero
    if delta > 0.0:
        downhill = 1.0 if h0 > 0.0 else -1.0
    else:
        downhill = -1.0 if h0 > 0.0 else 1.0
    while ha * hb > 0.0:
        grow_iters += 1
        if grow_iters > 200:
            raise InnerUnboundedError(
                "could not bracket the dual stationarity equation",
                delta=delta,
                last_c=b,
                last_h=hb,
            )
        nxt = b + downhill * step
        at_edge = False
        if nxt <= c_lo:
            nxt, at_edge = c_lo + abs(c_lo) * 1e-15 + 1e-300, True
        if nxt >= c_hi:
            nxt, at_edge = c_hi - abs(c_hi) * 1e-15 - 1e-300, True
        a, ha = b, hb
        b, hb = nxt, h(nxt)
        if ha * hb <= 0.0:
            break
        if at_edge:
            raise InnerUnboundedError(
                "dual stationarity equation has no root inside the conjugate "
                "domain; the inner problem is unbounded for this delta",
                delta=delta,
                boundary_c=b,
                boundary_residual=hb,
            )
        step *= 2.0
    lo_c, hi_c = (a, b) if a <= b else (b, a)
    h_lo = ha if a <= b else hb

    cdd = div.conjugate_double_prime
    c = 0.5 * (lo_c + hi_c)
    iters = grow_iters
    hc = h(c)
    while abs(hc) > _C_TOL and iters < _C_MAX_ITER:
        iters += 1
        took_newton = False
        if cdd is not None:
            slope = -delta * float(w @ cdd(-delta * (f + c)))
            if slope != 0.0 and np.isfinite(slope):
                cand = c - hc / slope
                if lo_c < cand < hi_c:
                    c_new = cand
                    took_newton = True
        if not took_newton:
            c_new = 0.5 * (lo_c + hi_c)
        h_new = h(c_new)
        # keep the sign change inside [lo_c, hi_c]
        if (h_new > 0.0) == (h_lo > 0.0):
            lo_c, h_lo = c_new, h_new
        else:
            hi_c = c_new
        c, hc = c_new, h_new
        if hi_c - lo_c <= 1e-17 * max(1.0, abs(c)):
            break

    zeta = -delta * (f + c)
    q = w * np.asarray(div.conjugate_prime(zeta))
    value = -float(w @ div.conjugate(zeta)) / delta - c
    return InnerSolution(
        c=float(c),
        value=value,
        q=q,
        active_clip=bool(np.any(np.asarray(div.conjugate_prime(zeta)) <= 1e-12)),
        iterations=iters,
        residual=abs(hc),
    )


# -- exact tilt for the modified chi-square ----------------------------------


def tilted_distribution_chi2(
    f: np.ndarray, weights: np.ndarray, delta: float
) -> tuple[np.ndarray, bool]:
    """Exact optimizing weights for the modified chi-square penalty.

    Unclipped case: ``q_i = p_i * (1 - delta * (f_i - mean))``.  When that
    goes negative, mass at the reward-extreme points (largest rewards for
    ``delta > 0``, smallest for ``delta < 0``) is clipped to zero by an exact
    active-set scan; ties in the reward order are broken by point index.

    Returns ``(q, clipped)``.
    """
    f = np.asarray(f, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.shape != w.shape or f.ndim != 1:
        raise ValidationError("rewards and weights must be matching 1-d arrays")
    d = float(delta)
    if d == 0.0:
        return w.copy(), False
    if d < 0.0:
        q, clipped = tilted_distribution_chi2(-f, w, -d)
        return q, clipped
    mean = float(w @ f)
    q = w * (1.0 - d * (f - mean))
    if np.all(q >= 0.0):
        return q, False
    order = np.argsort(f, kind="stable")
    fs, ws = f[order], w[order]
    pw = np.cumsum(ws)
    sw = np.cumsum(ws * fs)
    q_sorted = np.zeros_like(ws)
    for k in range(fs.size, 0, -1):
        c = (pw[k - 1] - 1.0 - d * sw[k - 1]) / (d * pw[k - 1])
        slack_last = 1.0 - d * (fs[k - 1] + c)
        if slack_last < 0.0:
            continue
        if k < fs.size and 1.0 - d * (fs[k] + c) > 0.0:
            continue
        q_sorted[:k] = ws[:k] * (1.0 - d * (fs[:k] + c))
        break
    else:  # pragma: no cover - the scan always terminates at k = 1
        raise SolverError("active-set scan failed", delta=d)
    q = np.empty_like(q_sorted)
    q[order] = np.maximum(q_sorted, 0.0)
    return q, True


def sensitivity_distribution(
    model: RewardModel,
    sample: EmpiricalSample,
    x,
    epsilon: float,
    div: PhiDivergence,
) -> np.ndarray:
    """Worst-case tilt at robustness budget ``epsilon >= 0``.

    ``epsilon = 0`` returns the base weights; otherwise this is the
    minimizing reweighting at penalty level ``epsilon``.
    """
    if epsilon < 0.0:
        raise ValidationError("epsilon must be nonnegative")
    if epsilon == 0.0:
        return sample.weights.copy()
    return dual_inner_value(model, sample, x, epsilon, div).q


# -- independent primal oracle ------------------------------------------------


def _project_simplex(v: np.ndarray) -> np.ndarray:
    # Euclidean projection onto the probability simplex (sort/cumsum form)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0.0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def primal_inner_brute_force(
    model: RewardModel,
    sample: EmpiricalSample,
    x,
    delta: float,
    div: PhiDivergence,
    restarts: int = 2,
    seed: int = 0,
) -> InnerSolution:
    """Direct simplex solve of the inner problem, for small samples.

    Projected gradient followed by exhaustive pairwise mass-exchange polish.
    The simplex objective is strictly convex after sign normalization, so a
    handful of starts (uniform, the two extreme vertices, a few random) is
    enough to land in the basin; the polish supplies the final precision.
    Limited to ``n <= 12``.  Shares no machinery with the dual path.
    """
    delta = _check_delta(delta)
    xv = as_decision(x, model.decision_dim)
    f = model.rewards(xv, sample.points)
    w = sample.weights
    n = f.size
    if n > 12:
        raise ValidationError("brute-force oracle is limited to n <= 12")
    sgn = 1.0 if delta > 0.0 else -1.0

    def objective(q: np.ndarray) -> float:
        z = q / w
        return sgn * float(q @ f + (w @ div.phi(z)) / delta)

    def grad(q: np.ndarray) -> np.ndarray:
        z = np.maximum(q / w, 0.0)
        return sgn * (f + np.asarray(div.phi_prime(z)) / delta)

    rng = np.random.default_rng(seed)
    starts = [w.copy()]
    starts += [np.eye(n)[int(np.argmax(f))], np.eye(n)[int(np.argmin(f))]]
    starts += [rng.dirichlet(np.ones(n)) for _ in range(restarts)]

    spread = float(np.max(f) - np.min(f)) + 1.0
    best_q, best_val = None, np.inf
    for q0 in starts:
        q = q0.astype(float)
        step = abs(delta) * float(np.min(w)) / 2.0
        step = max(step, 1e-8 / spread)
        val = objective(q)
        for _ in range(400):
            g = grad(q)
            q_new = _project_simplex(q - step * g)
            val_new = objective(q_new)
            bt = 0
            while val_new > val + 1e-15 and bt < 40:
                step *= 0.5
                q_new = _project_simplex(q - step * g)
                val_new = objective(q_new)
                bt += 1
            if bt == 0:
                step *= 1.3
            moved = float(np.max(np.abs(q_new - q)))
            q, val = q_new, val_new
            if moved <= 1e-14:
                break
        if val < best_val:
            best_q, best_val = q, val

    q = best_q
    # pairwise exchange polish: exact 1-d searches along q + t (e_i - e_j)
    def pair_delta(qi, qj, wi, wj, fi, fj, t):
        return sgn * (
            t * (fi - fj)
            + (
                wi * float(div.phi((qi + t) / wi))
                + wj * float(div.phi((qj - t) / wj))
                - wi * float(div.phi(qi / wi))
                - wj * float(div.phi(qj / wj))
            )
            / delta
        )

    inv_gr = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(60):
        improved = 0.0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                lo, hi = -q[i], q[j]
                if hi - lo <= 1e-16:
                    continue
                a, b = lo, hi
                x1 = b - inv_gr * (b - a)
                x2 = a + inv_gr * (b - a)
                f1 = pair_delta(q[i], q[j], w[i], w[j], f[i], f[j], x1)
                f2 = pair_delta(q[i], q[j], w[i], w[j], f[i], f[j], x2)
                for _k in range(70):
                    if f1 <= f2:
                        b, x2, f2 = x2, x1, f1
                        x1 = b - inv_gr * (b - a)
                        f1 = pair_delta(q[i], q[j], w[i], w[j], f[i], f[j], x1)
                    else:
                        a, x1, f1 = x1, x2, f2
                        x2 = a + inv_gr * (b - a)
                        f2 = pair_delta(q[i], q[j], w[i], w[j], f[i], f[j], x2)
                t = x1 if f1 < f2 else x2
                gain = pair_delta(q[i], q[j], w[i], w[j], f[i], f[j], t)
                for t_cand in (lo, hi, 0.0):
                    g_cand = pair_delta(q[i], q[j], w[i], w[j], f[i], f[j], t_cand)
                    if g_cand < gain:
                        t, gain = t_cand, g_cand
                if gain < -1e-15:
                    q = q.copy()
                    q[i] += t
                    q[j] -= t
                    q[i] = max(q[i], 0.0)
                    q[j] = max(q[j], 0.0)
                    improved += -gain
        if improved <= 1e-14:
            break

    total = float(q.sum())
    value = sgn * objective(q)  # undo the sign normalization
    return InnerSolution(
        c=float("nan"),
        value=value,
        q=q,
        active_clip=bool(np.any(q <= 1e-12)),
        iterations=0,
        residual=abs(total - 1.0),
    )
