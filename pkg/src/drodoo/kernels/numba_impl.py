"""JIT kernels for the hot experiment loops (uniform sample weights).

Every function here mirrors a reference implementation elsewhere in the
package (divergence/inner/models); equality is enforced by tests.  The
modified chi-square inner value is computed by an exact active-set scan over
sorted rewards rather than an iterative multiplier solve; optimistic tilts
(delta < 0) route through the identity value(f, delta) = -value(-f, -delta).
"""

import math

import numpy as np
from numba import config as _nb_config
from numba import njit, prange

# the built-in threading layer is always available and behaves identically
# for our deterministic kernels; pinning it avoids probing optional layers
_nb_config.THREADING_LAYER = "workqueue"

REFINE_ITERS = 48
COARSE_POINTS = 41
_INV_GOLDEN = 0.6180339887498949


@njit(cache=True)
def _chi2_value_core(fs, delta):
    # fs ascending, uniform weights, delta > 0
    n = fs.shape[0]
    total = 0.0
    for i in range(n):
        total += fs[i]
    s = total
    k_act = 1
    c = 0.0
    for k in range(n, 0, -1):
        c = (k - n - delta * s) / (delta * k)
        ok_last = 1.0 - delta * (fs[k - 1] + c) >= -1e-12
        ok_next = True
        if k < n:
            ok_next = 1.0 - delta * (fs[k] + c) <= 1e-12
        if ok_last and ok_next:
            k_act = k
            break
        s -= fs[k - 1]
        if k == 1:
            k_act = 1
    acc = 0.0
    for i in range(k_act):
        z = -delta * (fs[i] + c)
        acc += z + 0.5 * z * z
    acc += -0.5 * (n - k_act)
    return -acc / (n * delta) - c


@njit(cache=True)
def _chi2_value_sorted(fs, delta, scratch):
    # fs ascending; scratch has the same length
    n = fs.shape[0]
    if delta == 0.0:
        s = 0.0
        for i in range(n):
            s += fs[i]
        return s / n
    if delta > 0.0:
        return _chi2_value_core(fs, delta)
    for i in range(n):
        scratch[i] = -fs[n - 1 - i]
    return -_chi2_value_core(scratch, -delta)


@njit(cache=True)
def _chi2_value_any(f, delta):
    fs = np.sort(f)
    scratch = np.empty_like(fs)
    return _chi2_value_sorted(fs, delta, scratch)


@njit(cache=True)
def _sorted_rewards(x, ys, r, cc, s, q, out, buf):
    # ys ascending; writes the reward values in ascending order into out
    n = ys.shape[0]
    k = 0
    while k < n and ys[k] < x:
        k += 1
    # below the kink rewards move with (r - q); above they move with -s
    if r >= q:
        for i in range(k):
            buf[i] = (r - q) * ys[i] + (q - cc) * x
    else:
        for i in range(k):
            buf[i] = (r - q) * ys[k - 1 - i] + (q - cc) * x
    for i in range(n - k):
        buf[k + i] = (r - cc + s) * x - s * ys[n - 1 - i]
    i = 0
    j = k
    t = 0
    while i < k and j < n:
        if buf[i] <= buf[j]:
            out[t] = buf[i]
            i += 1
        else:
            out[t] = buf[j]
            j += 1
        t += 1
    while i < k:
        out[t] = buf[i]
        i += 1
        t += 1
    while j < n:
        out[t] = buf[j]
        j += 1
        t += 1


@njit(cache=True)
def _newsvendor_value(x, ys, delta, r, cc, s, q, out, buf):
    _sorted_rewards(x, ys, r, cc, s, q, out, buf)
    return _chi2_value_sorted(out, delta, buf)


@njit(cache=True)
def _saa_index(n, tau):
    # smallest order statistic whose cumulative weight reaches tau
    k = int(math.ceil(tau * n - 1e-9))
    if k < 1:
        k = 1
    if k > n:
        k = n
    return k - 1


@njit(cache=True)
def _family_solve(ys, deltas, r, cc, s, q, refine_iters, xs_out):
    # ys ascending; xs_out has len(deltas)
    #
    # Two regimes.  For delta >= 0 the objective is an infimum of concave
    # functions of the order quantity, hence concave: a coarse grid plus a
    # golden-section refinement in the winning cell finds the maximum.  For
    # delta < 0 it is a supremum of piecewise-linear concave functions with
    # kinks only at the sample points, hence convex between consecutive
    # sample points: the maximum sits exactly at a sample point, so an
    # argmax over the sample points is both exact and cheap.
    n = ys.shape[0]
    g_cnt = deltas.shape[0]
    tau = (r - cc + s) / (r + s - q)
    x0 = ys[_saa_index(n, tau)]
    y_lo = ys[0]
    y_hi = ys[n - 1]
    if y_hi - y_lo <= 0.0:
        for g in range(g_cnt):
            xs_out[g] = y_lo
        return
    n_cand = COARSE_POINTS + 1
    cand = np.empty(n_cand)
    step = (y_hi - y_lo) / (COARSE_POINTS - 1)
    for j in range(COARSE_POINTS):
        cand[j] = y_lo + step * j
    cand[COARSE_POINTS] = x0
    sorted_rw = np.empty((n_cand, n))
    buf = np.empty(n)
    out = np.empty(n)
    for j in range(n_cand):
        _sorted_rewards(cand[j], ys, r, cc, s, q, sorted_rw[j], buf)
    scratch = np.empty(n)
    have_kink_rows = False
    kink_rw = np.empty((n, n))
    for g in range(g_cnt):
        delta = deltas[g]
        if delta == 0.0:
            xs_out[g] = x0
            continue
        if delta < 0.0:
            if not have_kink_rows:
                for i in range(n):
                    _sorted_rewards(ys[i], ys, r, cc, s, q, kink_rw[i], buf)
                have_kink_rows = True
            best_i = 0
            best_val = -np.inf
            for i in range(n):
                v = _chi2_value_sorted(kink_rw[i], delta, scratch)
                if v > best_val:
                    best_val = v
                    best_i = i
            xs_out[g] = ys[best_i]
            continue
        best_j = 0
        best_val = -np.inf
        for j in range(n_cand):
            v = _chi2_value_sorted(sorted_rw[j], delta, scratch)
            if v > best_val:
                best_val = v
                best_j = j
        best_x = cand[best_j]
        if best_j < COARSE_POINTS:
            lo = cand[best_j - 1] if best_j > 0 else y_lo
            hi = cand[best_j + 1] if best_j < COARSE_POINTS - 1 else y_hi
        else:
            lo = x0 - step
            hi = x0 + step
            if lo < y_lo:
                lo = y_lo
            if hi > y_hi:
                hi = y_hi
        a = lo
        b = hi
        x1 = b - _INV_GOLDEN * (b - a)
        x2 = a + _INV_GOLDEN * (b - a)
        f1 = _newsvendor_value(x1, ys, delta, r, cc, s, q, out, buf)
        f2 = _newsvendor_value(x2, ys, delta, r, cc, s, q, out, buf)
        if f1 > best_val:
            best_val = f1
            best_x = x1
        if f2 > best_val:
            best_val = f2
            best_x = x2
        for _ in range(refine_iters):
            if f1 >= f2:
                b = x2
                x2 = x1
                f2 = f1
                x1 = b - _INV_GOLDEN * (b - a)
                f1 = _newsvendor_value(x1, ys, delta, r, cc, s, q, out, buf)
                if f1 > best_val:
                    best_val = f1
                    best_x = x1
            else:
                a = x1
                x1 = x2
                f1 = f2
                x2 = a + _INV_GOLDEN * (b - a)
                f2 = _newsvendor_value(x2, ys, delta, r, cc, s, q, out, buf)
                if f2 > best_val:
                    best_val = f2
                    best_x = x2
        xs_out[g] = best_x


@njit(cache=True)
def _pop_partial_moments(x, m, mu1, mu2, p):
    # E[Y^j 1(Y <= x)], j = 0, 1, 2, for the zero-truncated mixture, m >= 0
    w1 = p
    w2 = 1.0 - p
    m0 = w2 * math.exp(-m / mu2) if m > 0.0 else w2
    m1 = 0.0
    m2 = 0.0
    if x < 0.0:
        return 0.0, 0.0, 0.0
    a = m - x
    if a < 0.0:
        a = 0.0
    if a < m:
        ea = math.exp(-a / mu2)
        em = math.exp(-m / mu2)
        e0 = ea - em
        i1 = (mu2 - (m + mu2) * em) - (mu2 - (a + mu2) * ea)
        i2 = (2.0 * mu2 * mu2 - (m * m + 2.0 * m * mu2 + 2.0 * mu2 * mu2) * em) - (
            2.0 * mu2 * mu2 - (a * a + 2.0 * a * mu2 + 2.0 * mu2 * mu2) * ea
        )
        m0 += w2 * e0
        m1 += w2 * (m * e0 - i1)
        m2 += w2 * (m * m * e0 - 2.0 * m * i1 + i2)
    if x > m:
        t = x - m
        et = math.exp(-t / mu1)
        e0 = 1.0 - et
        i1 = mu1 - (t + mu1) * et
        i2 = 2.0 * mu1 * mu1 - (t * t + 2.0 * t * mu1 + 2.0 * mu1 * mu1) * et
        m0 += w1 * e0
        m1 += w1 * (m * e0 + i1)
        m2 += w1 * (m * m * e0 + 2.0 * m * i1 + i2)
    return m0, m1, m2


@njit(cache=True)
def _pop_totals(m, mu1, mu2, p):
    big = m + 800.0 * mu1
    return _pop_partial_moments(big, m, mu1, mu2, p)


@njit(cache=True)
def _pop_mean_var(x, r, cc, s, q, m, mu1, mu2, p):
    m0, m1, m2 = _pop_partial_moments(x, m, mu1, mu2, p)
    _, ey, ey2 = _pop_totals(m, mu1, mu2, p)
    a_lo = (q - cc) * x
    b_lo = r - q
    a_hi = (r - cc + s) * x
    b_hi = -s
    mean = a_lo * m0 + b_lo * m1 + a_hi * (1.0 - m0) + b_hi * (ey - m1)
    second = (
        a_lo * a_lo * m0
        + 2.0 * a_lo * b_lo * m1
        + b_lo * b_lo * m2
        + a_hi * a_hi * (1.0 - m0)
        + 2.0 * a_hi * b_hi * (ey - m1)
        + b_hi * b_hi * (ey2 - m2)
    )
    var = second - mean * mean
    if var < 0.0:
        var = 0.0
    return mean, var


@njit(cache=True, parallel=True)
def _sweep(Y, deltas, r, cc, s, q, m, mu1, mu2, p, refine_iters, xs, in_mean, in_var, oos_mean, oos_var):
    n_ds = Y.shape[0]
    n = Y.shape[1]
    g_cnt = deltas.shape[0]
    for d in prange(n_ds):
        ys = np.sort(Y[d])
        row_x = np.empty(g_cnt)
        _family_solve(ys, deltas, r, cc, s, q, refine_iters, row_x)
        out = np.empty(n)
        buf = np.empty(n)
        for g in range(g_cnt):
            x = row_x[g]
            _sorted_rewards(x, ys, r, cc, s, q, out, buf)
            mu = 0.0
            for i in range(n):
                mu += out[i]
            mu /= n
            v = 0.0
            for i in range(n):
                dlt = out[i] - mu
                v += dlt * dlt
            v /= n
            pm, pv = _pop_mean_var(x, r, cc, s, q, m, mu1, mu2, p)
            xs[d, g] = x
            in_mean[d, g] = mu
            in_var[d, g] = v
            oos_mean[d, g] = pm
            oos_var[d, g] = pv


@njit(cache=True)
def _original_mean_reward(x, ys, r, cc, s, q):
    n = ys.shape[0]
    acc = 0.0
    for i in range(n):
        y = ys[i]
        lo = x if x < y else y
        over = x - y if x > y else 0.0
        under = y - x if y > x else 0.0
        acc += r * lo + q * over - s * under - cc * x
    return acc / n


@njit(cache=True, parallel=True)
def _bootstrap(Y, idx, deltas, r, cc, s, q, refine_iters, curves):
    n_ds = Y.shape[0]
    n_rs = idx.shape[1]
    n = Y.shape[1]
    g_cnt = deltas.shape[0]
    for d in prange(n_ds):
        orig = Y[d]
        acc = np.zeros(g_cnt)
        ys_b = np.empty(n)
        row_x = np.empty(g_cnt)
        for b in range(n_rs):
            for i in range(n):
                ys_b[i] = orig[idx[d, b, i]]
            ys_sorted = np.sort(ys_b)
            _family_solve(ys_sorted, deltas, r, cc, s, q, refine_iters, row_x)
            for g in range(g_cnt):
                acc[g] += _original_mean_reward(row_x[g], orig, r, cc, s, q)
        for g in range(g_cnt):
            curves[d, g] = acc[g] / n_rs


# -- python-facing wrappers ---------------------------------------------------


def chi2_inner_value(f, delta):
    return float(_chi2_value_any(np.ascontiguousarray(f, dtype=np.float64), float(delta)))


def newsvendor_family(ys, deltas, r, c, s, q, refine_iters=REFINE_ITERS):
    ys = np.sort(np.ascontiguousarray(ys, dtype=np.float64))
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    xs = np.empty(deltas.shape[0])
    _family_solve(ys, deltas, float(r), float(c), float(s), float(q), refine_iters, xs)
    return xs


def newsvendor_sweep(Y, deltas, inv, dem, refine_iters=REFINE_ITERS):
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    shape = (Y.shape[0], deltas.shape[0])
    xs = np.empty(shape)
    in_mean = np.empty(shape)
    in_var = np.empty(shape)
    oos_mean = np.empty(shape)
    oos_var = np.empty(shape)
    _sweep(
        Y,
        deltas,
        float(inv.r),
        float(inv.c),
        float(inv.s),
        float(inv.q),
        float(dem.m),
        float(dem.mu1),
        float(dem.mu2),
        float(dem.p),
        refine_iters,
        xs,
        in_mean,
        in_var,
        oos_mean,
        oos_var,
    )
    return xs, in_mean, in_var, oos_mean, oos_var


def newsvendor_bootstrap(Y, idx, deltas, inv, refine_iters=REFINE_ITERS):
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    curves = np.empty((Y.shape[0], deltas.shape[0]))
    _bootstrap(
        Y, idx, deltas, float(inv.r), float(inv.c), float(inv.s), float(inv.q), refine_iters, curves
    )
    return curves


def population_mean_var(x, inv, dem):
    return _pop_mean_var(
        float(x),
        float(inv.r),
        float(inv.c),
        float(inv.s),
        float(inv.q),
        float(dem.m),
        float(dem.mu1),
        float(dem.mu2),
        float(dem.p),
    )
