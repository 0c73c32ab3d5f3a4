"""Samples, reward models, and the inventory demand population.

Conventions used throughout the package:

* an empirical sample holds points as an ``(n, l)`` array with strictly
  positive weights summing to one;
* a reward model evaluates ``f(x, Y)`` vectorized over sample rows: for a
  decision ``x`` of shape ``(d,)`` and points ``(n, l)``, ``evaluate`` returns
  ``(n,)``, ``gradient`` returns ``(n, d)``, ``hessian`` returns ``(n, d, d)``;
* weighted moments are plain weighted central moments (no small-sample
  correction): they are moments of the discrete distribution itself.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import UnsupportedModelError, ValidationError

__all__ = [
    "EmpiricalSample",
    "RewardModel",
    "InventoryParams",
    "DemandMixtureParams",
    "RewardStats",
    "inventory_reward",
    "quadratic_reward",
    "constant_reward",
    "sample_demand",
    "demand_moments",
    "demand_quantile",
    "population_expected_reward",
    "population_reward_moments",
    "population_optimal_order",
    "reward_statistics",
    "gauss_hermite_population",
    "gauss_laguerre_population",
]

SMOOTH = "smooth"
PIECEWISE_LINEAR_SCALAR = "piecewise_linear_scalar"


@dataclass(frozen=True)
class EmpiricalSample:
    """Weighted point cloud standing in for a distribution.

    ``points`` is ``(n, l)``; ``weights`` is ``(n,)``, strictly positive,
    summing to one within 1e-12.  Arrays are copied and frozen on creation.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValidationError("points must be a nonempty (n, l) array")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise ValidationError("weights must be (n,) matching points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite values")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValidationError("weights must be finite and strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValidationError(f"weights sum to {float(w.sum())!r}, not 1")
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def scalar_values(self) -> np.ndarray:
        if self.dim != 1:
            raise ValidationError("sample is not scalar-valued")
        return self.points[:, 0]

    @classmethod
    def from_values(cls, values, weights=None) -> "EmpiricalSample":
        """Build a scalar sample from a 1-d value list; uniform weights by default."""
        vals = np.asarray(values, dtype=float).reshape(-1, 1)
        if weights is None:
            weights = np.full(vals.shape[0], 1.0 / vals.shape[0])
        return cls(points=vals, weights=np.asarray(weights, dtype=float))

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"y_{j + 1}" for j in range(self.dim)] + ["weight"])
            for row, w in zip(self.points, self.weights):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])

    @classmethod
    def from_csv(cls, path) -> "EmpiricalSample":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[-1] != "weight" or len(header) < 2:
                raise ValidationError("sample CSV must have columns y_1..y_l, weight")
            rows = [r for r in reader if r]
        if not rows:
            raise ValidationError("sample CSV has no data rows")
        try:
            data = np.array([[float(v) for v in r] for r in rows])
        except ValueError as exc:
            raise ValidationError(f"sample CSV has a non-numeric cell: {exc}") from exc
        if data.shape[1] != len(header):
            raise ValidationError("sample CSV rows do not match the header")
        return cls(points=data[:, :-1], weights=data[:, -1])

    def to_json(self) -> str:
        return json.dumps(
            {"points": self.points.tolist(), "weights": self.weights.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalSample":
        try:
            doc = json.loads(text)
            return cls(
                points=np.asarray(doc["points"], dtype=float),
                weights=np.asarray(doc["weights"], dtype=float),
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"bad sample JSON: {exc}") from exc


@dataclass(frozen=True)
class RewardModel:
    """Reward function plus the derivative callables a solver may need.

    ``smoothness`` routes the solvers: ``"smooth"`` models must provide
    ``gradient`` and ``hessian`` and are handled by stationarity systems;
    ``"piecewise_linear_scalar"`` models are one-dimensional and handled by
    exact quantile/search paths.
    """

    decision_dim: int
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    smoothness: str = SMOOTH
    kind: str = "custom"
    params: object = None

    def __post_init__(self):
        if self.decision_dim < 1:
            raise ValidationError("decision_dim must be >= 1")
        if self.smoothness not in (SMOOTH, PIECEWISE_LINEAR_SCALAR):
            raise ValidationError(f"unknown smoothness tag {self.smoothness!r}")
        if self.smoothness == PIECEWISE_LINEAR_SCALAR and self.decision_dim != 1:
            raise ValidationError("piecewise-linear path is scalar only")

    def rewards(self, x, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluate(as_decision(x, self.decision_dim), points))


def as_decision(x, d: int) -> np.ndarray:
    """Normalize a decision to a float vector of length ``d``."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (d,):
        raise ValidationError(f"decision must have shape ({d},), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class InventoryParams:
    """Newsvendor prices: sell at ``r``, buy at ``c``, salvage ``q``, shortage penalty ``s``."""

    r: float
    c: float
    s: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        vals = (self.r, self.c, self.s, self.q)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("inventory prices must be finite")
        if self.r <= 0 or self.c <= 0 or self.s < 0 or self.q < 0:
            raise ValidationError("need r > 0, c > 0, s >= 0, q >= 0")
        # both newsvendor cost rates must be positive for a unique interior ratio
        if self.c <= self.q:
            raise ValidationError("overage cost requires c > q")
        if self.r + self.s <= self.c:
            raise ValidationError("underage cost requires r + s > c")

    @property
    def critical_ratio(self) -> float:
        """Target cumulative probability of the optimal order quantity."""
        return (self.r - self.c + self.s) / (self.r + self.s - self.q)


@dataclass(frozen=True)
class DemandMixtureParams:
    """Demand ``Y = max(m + I*X1 - (1-I)*X2, 0)``.

    ``I`` is Bernoulli(``p``); ``X1``, ``X2`` are exponential with means
    ``mu1``, ``mu2``.  Negative mixture draws are truncated to zero, leaving
    an atom at zero of mass ``(1-p) * exp(-m / mu2)`` (for ``m >= 0``).
    """

    m: float
    mu1: float
    mu2: float
    p: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.m, self.mu1, self.mu2, self.p)):
            raise ValidationError("demand parameters must be finite")
        if self.mu1 <= 0 or self.mu2 <= 0:
            raise ValidationError("exponential means must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("mixture probability must lie in [0, 1]")


def inventory_reward(params: InventoryParams) -> RewardModel:
    """Newsvendor reward ``r*min(x,Y) + q*(x-Y)^+ - s*(Y-x)^+ - c*x``.

    Piecewise linear and concave in the scalar order quantity ``x``.
    """

    r, c, s, q = params.r, params.c, params.s, params.q

    def evaluate(x, points):
        y = np.asarray(points)[:, 0]
        xv = float(x[0])
        return (
            r * np.minimum(xv, y)
            + q * np.maximum(xv - y, 0.0)
            - s * np.maximum(y - xv, 0.0)
            - c * xv
        )

    return RewardModel(
        decision_dim=1,
        evaluate=evaluate,
        smoothness=PIECEWISE_LINEAR_SCALAR,
        kind="inventory",
        params=params,
    )


def quadratic_reward(dim: int = 1) -> RewardModel:
    """Smooth test model ``f(x, Y) = -||x - Y||^2 / 2`` with exact derivatives."""

    def evaluate(x, points):
        diff = np.asarray(points) - x[None, :]
        return -0.5 * np.sum(diff * diff, axis=1)

    def gradient(x, points):
        return np.asarray(points) - x[None, :]

    def hessian(x, points):
        n = np.asarray(points).shape[0]
        return np.broadcast_to(-np.eye(dim), (n, dim, dim)).copy()

    return RewardModel(
        decision_dim=dim,
        evaluate=evaluate,
        gradient=gradient,
        hessian=hessian,
        smoothness=SMOOTH,
        kind="quadratic",
    )


def constant_reward(value: float = 0.0) -> RewardModel:
    """Degenerate reward ignoring both decision and outcome.

    Tagged for the scalar search path: the zero Hessian fails the strict
    concavity check of the smooth path, while the search path returns the
    same decision for every penalty level, which is the sensible answer.
    """

    def evaluate(x, points):
        return np.full(np.asarray(points).shape[0], float(value))

    return RewardModel(
        decision_dim=1,
        evaluate=evaluate,
        smoothness=PIECEWISE_LINEAR_SCALAR,
        kind="constant",
        params=float(value),
    )


# -- demand population ------------------------------------------------------


def sample_demand_values(params: DemandMixtureParams, n: int, seed) -> np.ndarray:
    """Draw ``n`` truncated-mixture demand values as a plain ``(n,)`` array.

    ``seed`` is an integer or a ``numpy.random.Generator``.  Draw order is
    fixed (uniforms for the branch, then both exponentials) so a given
    generator state always yields the same sample.
    """
    if n < 1:
        raise ValidationError("need n >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    branch = rng.random(n) < params.p
    x1 = rng.exponential(params.mu1, n)
    x2 = rng.exponential(params.mu2, n)
    return np.maximum(params.m + np.where(branch, x1, -x2), 0.0)


def sample_demand(params: DemandMixtureParams, n: int, seed) -> EmpiricalSample:
    """Draw ``n`` truncated-mixture demand points with uniform weights."""
    return EmpiricalSample.from_values(sample_demand_values(params, n, seed))


def _exp_partial_m1(t: float, mu: float) -> float:
    # E[U 1(U <= t)] for U ~ Exp(mu)
    return mu - (t + mu) * math.exp(-t / mu)


def _exp_partial_m2(t: float, mu: float) -> float:
    # E[U^2 1(U <= t)] for U ~ Exp(mu)
    return 2.0 * mu * mu - (t * t + 2.0 * t * mu + 2.0 * mu * mu) * math.exp(-t / mu)


def _demand_partial_moments(params: DemandMixtureParams, x: float):
    """Closed-form ``E[Y^j 1(Y <= x)]`` for j = 0, 1, 2 (requires ``m >= 0``).

    The lower mixture branch contributes on ``[0, m]`` via ``Y = m - U`` with
    ``U ~ Exp(mu2)`` (mass beyond ``U = m`` is the atom at zero); the upper
    branch contributes on ``[m, inf)`` via ``Y = m + V``, ``V ~ Exp(mu1)``.
    """
    m, mu1, mu2, p = params.m, params.mu1, params.mu2, params.p
    if m < 0:
        raise UnsupportedModelError(
            "closed-form demand moments require m >= 0; use Monte-Carlo instead"
        )
    w1, w2 = p, 1.0 - p
    atom = w2 * math.exp(-m / mu2) if m > 0 else w2
    if x < 0.0:
        return 0.0, 0.0, 0.0
    m0, m1, m2 = atom, 0.0, 0.0
    # lower branch: U in (max(m - x, 0), m]
    a = max(m - x, 0.0)
    if a < m:
        e0 = math.exp(-a / mu2) - math.exp(-m / mu2)
        i1 = _exp_partial_m1(m, mu2) - _exp_partial_m1(a, mu2)
        i2 = _exp_partial_m2(m, mu2) - _exp_partial_m2(a, mu2)
        m0 += w2 * e0
        m1 += w2 * (m * e0 - i1)
        m2 += w2 * (m * m * e0 - 2.0 * m * i1 + i2)
    # upper branch: V in [0, x - m]
    if x > m:
        t = x - m
        e0 = 1.0 - math.exp(-t / mu1)
        i1 = _exp_partial_m1(t, mu1)
        i2 = _exp_partial_m2(t, mu1)
        m0 += w1 * e0
        m1 += w1 * (m * e0 + i1)
        m2 += w1 * (m * m * e0 + 2.0 * m * i1 + i2)
    return m0, m1, m2


def demand_moments(params: DemandMixtureParams) -> tuple[float, float]:
    """Exact population mean and standard deviation of the truncated demand."""
    big = params.m + 800.0 * params.mu1  # far past any effective support
    _, m1, m2 = _demand_partial_moments(params, big)
    var = m2 - m1 * m1
    return m1, math.sqrt(max(var, 0.0))


def demand_quantile(params: DemandMixtureParams, tau: float) -> float:
    """Smallest ``x`` with ``P(Y <= x) >= tau`` (requires ``m >= 0``)."""
    if not 0.0 < tau < 1.0:
        raise ValidationError("tau must lie strictly inside (0, 1)")
    m, mu1, mu2, p = params.m, params.mu1, params.mu2, params.p
    if m < 0:
        raise UnsupportedModelError("quantile needs m >= 0")
    atom = (1.0 - p) * math.exp(-m / mu2)
    if tau <= atom:
        return 0.0
    if tau <= 1.0 - p:
        # F(x) = (1-p) exp(-(m-x)/mu2) on (0, m]
        return m + mu2 * math.log(tau / (1.0 - p))
    # tail: P(Y > x) = p exp(-(x-m)/mu1)
    return m + mu1 * math.log(p / (1.0 - tau))


def population_reward_moments(
    inv: InventoryParams, demand: DemandMixtureParams, x: float
) -> tuple[float, float]:
    """Exact ``(E f(x, Y), Var f(x, Y))`` under the truncated mixture.

    Splits the reward at the ``Y = x`` kink; each side is affine in ``Y`` so
    partial moments up to order two suffice.
    """
    xv = float(x)
    if xv < 0.0:
        raise ValidationError("order quantity must be nonnegative")
    r, c, s, q = inv.r, inv.c, inv.s, inv.q
    big = demand.m + 800.0 * demand.mu1
    m0, m1, m2 = _demand_partial_moments(demand, xv)
    _, t1, t2 = _demand_partial_moments(demand, big)
    ey, ey2 = t1, t2
    # below the kink: f = (r-q) Y + (q-c) x ; above: f = (r-c+s) x - s Y
    a_lo, b_lo = (q - c) * xv, r - q
    a_hi, b_hi = (r - c + s) * xv, -s
    mean = (
        a_lo * m0
        + b_lo * m1
        + a_hi * (1.0 - m0)
        + b_hi * (ey - m1)
    )
    second = (
        a_lo * a_lo * m0
        + 2.0 * a_lo * b_lo * m1
        + b_lo * b_lo * m2
        + a_hi * a_hi * (1.0 - m0)
        + 2.0 * a_hi * b_hi * (ey - m1)
        + b_hi * b_hi * (ey2 - m2)
    )
    return mean, max(second - mean * mean, 0.0)


def population_expected_reward(
    inv: InventoryParams, demand: DemandMixtureParams, x: float
) -> float:
    """Exact out-of-sample expected reward of ordering ``x``."""
    return population_reward_moments(inv, demand, x)[0]


def population_optimal_order(
    inv: InventoryParams, demand: DemandMixtureParams
) -> tuple[float, float]:
    """Population-optimal order quantity and its expected reward."""
    x_star = demand_quantile(demand, inv.critical_ratio)
    return x_star, population_expected_reward(inv, demand, x_star)


# -- weighted reward statistics ---------------------------------------------


@dataclass(frozen=True)
class RewardStats:
    """Weighted moments of the reward (and its derivatives) at a decision."""

    mean: float
    variance: float
    grad_mean: np.ndarray | None
    hessian_mean: np.ndarray | None
    cov_grad_reward: np.ndarray | None


def reward_statistics(model: RewardModel, sample: EmpiricalSample, x) -> RewardStats:
    """Weighted mean/variance of ``f`` and, for smooth models, the gradient
    mean, Hessian mean, and ``Cov[grad f, f]``."""
    xv = as_decision(x, model.decision_dim)
    w = sample.weights
    f = model.rewards(xv, sample.points)
    mean = float(w @ f)
    centered = f - mean
    variance = float(w @ (centered * centered))
    grad_mean = hess_mean = cov = None
    if model.gradient is not None:
        g = np.asarray(model.gradient(xv, sample.points))
        grad_mean = w @ g
        cov = (w * centered) @ g  # = Cov[grad f, f] since weights sum to 1
    if model.hessian is not None:
        h = np.asarray(model.hessian(xv, sample.points))
        hess_mean = np.einsum("i,ijk->jk", w, h)
    return RewardStats(mean, variance, grad_mean, hess_mean, cov)


# -- quadrature stand-ins for smooth populations -----------------------------


def gauss_hermite_population(mean: float, sd: float, nodes: int = 201) -> EmpiricalSample:
    """Gaussian population as a Gauss-Hermite quadrature sample.

    Weighted moments of polynomials up to degree ``2*nodes - 1`` are exact,
    which makes this a deterministic stand-in for N(mean, sd^2) in the
    population-level expansion estimates.
    """
    if sd <= 0:
        raise ValidationError("sd must be positive")
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return EmpiricalSample(points=(mean + sd * x).reshape(-1, 1), weights=w / w.sum())


def gauss_laguerre_population(scale: float, nodes: int = 120) -> EmpiricalSample:
    """Exponential(mean=scale) population as a Gauss-Laguerre quadrature sample.

    Far-tail nodes whose weights underflow to zero are dropped (mass below
    double precision); the rest are renormalized.  The node count is capped
    at 150: beyond that the Newton iteration inside ``laggauss`` overflows
    and returns non-finite weights.
    """
    if scale <= 0:
        raise ValidationError("scale must be positive")
    if not 1 <= nodes <= 150:
        raise ValidationError("laguerre nodes must be in [1, 150]")
    x, w = np.polynomial.laguerre.laggauss(nodes)
    keep = w > 0.0
    x, w = x[keep], w[keep]
    return EmpiricalSample(points=(scale * x).reshape(-1, 1), weights=w / w.sum())
