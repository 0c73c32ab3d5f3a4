"""Pure-numpy fallback kernels (uniform sample weights).

Same contracts as the JIT backend: an exact active-set scan for the modified
chi-square inner value on sorted rewards, an exact sample-point argmax on
the optimistic side plus a coarse-grid + golden-section search on the
concave robust side for the order-quantity problem, and closed-form
population moments.  Batch work is vectorized across the delta grid; the
golden-section refinement advances every delta in lock-step because the
iteration count is fixed.  Results agree with the JIT backend to
floating-point noise (the reduction order differs), not bit-for-bit.
"""

import math

import numpy as np

from .. import models as _models

REFINE_ITERS = 48
COARSE_POINTS = 41
_INV_GOLDEN = 0.6180339887498949


def _chi2_values_rows(f_sorted, deltas):
    """Inner values for each (row of ascending rewards, matching delta != 0)."""
    f_sorted = np.atleast_2d(f_sorted)
    deltas = np.atleast_1d(deltas)
    m, n = f_sorted.shape
    neg = deltas < 0.0
    fs = np.where(neg[:, None], -f_sorted[:, ::-1], f_sorted)
    d = np.abs(deltas)[:, None]
    cum = np.cumsum(fs, axis=1)
    k = np.arange(1, n + 1, dtype=np.float64)[None, :]
    c = (k - n - d * cum) / (d * k)
    ok_last = 1.0 - d * (fs + c) >= -1e-12
    ok_next = np.empty((m, n), dtype=bool)
    ok_next[:, :-1] = 1.0 - d * (fs[:, 1:] + c[:, :-1]) <= 1e-12
    ok_next[:, -1] = True
    valid = ok_last & ok_next
    rev = valid[:, ::-1]
    pos_rev = np.argmax(rev, axis=1)
    rows = np.arange(m)
    kidx = np.where(rev[rows, pos_rev], n - 1 - pos_rev, 0)
    c_sel = c[rows, kidx]
    zeta = -d * (fs + c_sel[:, None])
    conj = np.where(zeta >= -1.0, zeta + 0.5 * zeta * zeta, -0.5)
    vals = -conj.mean(axis=1) / np.abs(deltas) - c_sel
    return np.where(neg, -vals, vals)


def _reward_matrix(xs, ys, r, c, s, q):
    """Rewards (len(xs), len(ys)); same elementwise arithmetic as the JIT path."""
    xs = np.asarray(xs, dtype=np.float64)[:, None]
    ys = np.asarray(ys, dtype=np.float64)[None, :]
    return np.where(ys < xs, (r - q) * ys + (q - c) * xs, (r - c + s) * xs - s * ys)


def _values_at(xs, ys_sorted, deltas, r, c, s, q):
    rewards = np.sort(_reward_matrix(xs, ys_sorted, r, c, s, q), axis=1)
    out = np.empty(len(deltas))
    zero = deltas == 0.0
    if zero.any():
        out[zero] = rewards[zero].mean(axis=1)
    nz = ~zero
    if nz.any():
        out[nz] = _chi2_values_rows(rewards[nz], deltas[nz])
    return out


def _saa_index(n, tau):
    k = int(math.ceil(tau * n - 1e-9))
    return min(max(k, 1), n) - 1


def chi2_inner_value(f, delta):
    f = np.sort(np.asarray(f, dtype=np.float64))
    delta = float(delta)
    if delta == 0.0:
        return float(f.mean())
    return float(_chi2_values_rows(f[None, :], np.array([delta]))[0])


def newsvendor_family(ys, deltas, r, c, s, q, refine_iters=REFINE_ITERS):
    ys = np.sort(np.asarray(ys, dtype=np.float64))
    deltas = np.asarray(deltas, dtype=np.float64)
    n = ys.shape[0]
    r, c, s, q = float(r), float(c), float(s), float(q)
    tau = (r - c + s) / (r + s - q)
    x0 = ys[_saa_index(n, tau)]
    y_lo, y_hi = ys[0], ys[-1]
    xs = np.full(deltas.shape[0], x0)
    if y_hi - y_lo <= 0.0:
        return np.full(deltas.shape[0], y_lo)
    # delta < 0: the objective is a supremum of piecewise-linear concave
    # functions with kinks only at the sample points, hence convex between
    # consecutive sample points; its maximum sits exactly at a sample point.
    neg = np.nonzero(deltas < 0.0)[0]
    if neg.size:
        kink_rewards = np.sort(_reward_matrix(ys, ys, r, c, s, q), axis=1)
        rep = np.repeat(kink_rewards[None, :, :], neg.size, axis=0).reshape(-1, n)
        rep_d = np.repeat(deltas[neg], n)
        vals = _chi2_values_rows(rep, rep_d).reshape(neg.size, n)
        xs[neg] = ys[np.argmax(vals, axis=1)]

    # delta > 0: the objective is an infimum of concave functions, hence
    # concave; coarse grid plus golden-section refinement is exact.
    live = np.nonzero(deltas > 0.0)[0]
    if live.size == 0:
        return xs
    dl = deltas[live]
    step = (y_hi - y_lo) / (COARSE_POINTS - 1)
    cand = np.empty(COARSE_POINTS + 1)
    cand[:COARSE_POINTS] = y_lo + step * np.arange(COARSE_POINTS)
    cand[COARSE_POINTS] = x0
    cand_rewards = np.sort(_reward_matrix(cand, ys, r, c, s, q), axis=1)
    n_cand = cand.shape[0]
    rep_rewards = np.repeat(cand_rewards[None, :, :], dl.shape[0], axis=0).reshape(-1, n)
    rep_deltas = np.repeat(dl, n_cand)
    coarse_vals = _chi2_values_rows(rep_rewards, rep_deltas).reshape(dl.shape[0], n_cand)
    best_j = np.argmax(coarse_vals, axis=1)
    best_val = coarse_vals[np.arange(dl.shape[0]), best_j]
    best_x = cand[best_j]
    on_grid = best_j < COARSE_POINTS
    lo = np.where(on_grid, cand[np.maximum(best_j - 1, 0)], np.maximum(x0 - step, y_lo))
    hi = np.where(
        on_grid,
        cand[np.minimum(best_j + 1, COARSE_POINTS - 1)],
        np.minimum(x0 + step, y_hi),
    )
    a, b = lo, hi
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1 = _values_at(x1, ys, dl, r, c, s, q)
    f2 = _values_at(x2, ys, dl, r, c, s, q)
    for probe, val in ((x1, f1), (x2, f2)):
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_x = np.where(better, probe, best_x)
    for _ in range(refine_iters):
        cond = f1 >= f2
        b = np.where(cond, x2, b)
        a = np.where(cond, a, x1)
        fresh = np.where(cond, b - _INV_GOLDEN * (b - a), a + _INV_GOLDEN * (b - a))
        fresh_f = _values_at(fresh, ys, dl, r, c, s, q)
        x1, f1, x2, f2 = (
            np.where(cond, fresh, x2),
            np.where(cond, fresh_f, f2),
            np.where(cond, x1, fresh),
            np.where(cond, f1, fresh_f),
        )
        better = fresh_f > best_val
        best_val = np.where(better, fresh_f, best_val)
        best_x = np.where(better, fresh, best_x)
    xs[live] = best_x
    return xs


def newsvendor_sweep(Y, deltas, inv, dem, refine_iters=REFINE_ITERS):
    Y = np.asarray(Y, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    shape = (Y.shape[0], deltas.shape[0])
    xs = np.empty(shape)
    in_mean = np.empty(shape)
    in_var = np.empty(shape)
    oos_mean = np.empty(shape)
    oos_var = np.empty(shape)
    for d in range(Y.shape[0]):
        ys = np.sort(Y[d])
        row_x = newsvendor_family(ys, deltas, inv.r, inv.c, inv.s, inv.q, refine_iters)
        rewards = _reward_matrix(row_x, ys, inv.r, inv.c, inv.s, inv.q)
        xs[d] = row_x
        in_mean[d] = rewards.mean(axis=1)
        in_var[d] = rewards.var(axis=1)
        for g in range(deltas.shape[0]):
            oos_mean[d, g], oos_var[d, g] = population_mean_var(row_x[g], inv, dem)
    return xs, in_mean, in_var, oos_mean, oos_var


def newsvendor_bootstrap(Y, idx, deltas, inv, refine_iters=REFINE_ITERS):
    Y = np.asarray(Y, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    deltas = np.asarray(deltas, dtype=np.float64)
    curves = np.zeros((Y.shape[0], deltas.shape[0]))
    for d in range(Y.shape[0]):
        orig = Y[d]
        for b in range(idx.shape[1]):
            row_x = newsvendor_family(
                orig[idx[d, b]], deltas, inv.r, inv.c, inv.s, inv.q, refine_iters
            )
            curves[d] += _reward_matrix(row_x, orig, inv.r, inv.c, inv.s, inv.q).mean(axis=1)
        curves[d] /= idx.shape[1]
    return curves


def population_mean_var(x, inv, dem):
    return _models.population_reward_moments(inv, dem, float(x))
