"""Divergence penalties between reweightings of a discrete sample.

A divergence here is the weighted sum ``sum_i p_i * phi(q_i / p_i)`` where
``phi`` is convex, finite on ``z >= 0`` with ``phi(1) = 0``, and ``+inf`` for
``z < 0``.  The record also carries the convex conjugate restricted to the
nonnegative half-line,

    phi_star(zeta) = sup_{z >= 0} { zeta * z - phi(z) },

which is what every dual computation in this package consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

__all__ = [
    "PhiDivergence",
    "modified_chi2",
    "divergence_value",
    "as_distribution",
]


@dataclass(frozen=True)
class PhiDivergence:
    """A smooth divergence generator and its conjugate machinery.

    Attributes:
        name: identifier recorded in run metadata.
        phi: elementwise generator; must return ``+inf`` for negative input.
        phi_prime: derivative of ``phi`` on ``z >= 0``.
        phi_double_prime_at_1: curvature at ``z = 1``; must be positive.
        conjugate: ``phi_star`` as defined above, elementwise.
        conjugate_prime: derivative of ``phi_star`` (nondecreasing, equals the
            optimal ``z`` in the sup).
        conjugate_domain: open interval of ``zeta`` on which ``phi_star`` is
            finite.  ``(-inf, inf)`` for the modified chi-square.
        conjugate_double_prime: optional second derivative of ``phi_star``;
            when present, stationarity systems use analytic Jacobians.
    """

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    phi_prime: Callable[[np.ndarray], np.ndarray]
    phi_double_prime_at_1: float
    conjugate: Callable[[np.ndarray], np.ndarray]
    conjugate_prime: Callable[[np.ndarray], np.ndarray]
    conjugate_domain: tuple[float, float] = (-np.inf, np.inf)
    conjugate_double_prime: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None
    )

    def __post_init__(self):
        if not np.isfinite(self.phi_double_prime_at_1) or self.phi_double_prime_at_1 <= 0:
            raise ValidationError("phi_double_prime_at_1 must be finite and positive")
        lo, hi = self.conjugate_domain
        if not lo < hi:
            raise ValidationError("conjugate_domain must be a nonempty interval")


def _chi2_phi(z):
    z = np.asarray(z, dtype=float)
    out = np.where(z < 0.0, np.inf, 0.5 * (z - 1.0) ** 2)
    return out if out.ndim else float(out)


def _chi2_phi_prime(z):
    z = np.asarray(z, dtype=float)
    out = z - 1.0
    return out if out.ndim else float(out)


def _chi2_conjugate(zeta):
    zeta = np.asarray(zeta, dtype=float)
    out = np.where(zeta >= -1.0, zeta + 0.5 * zeta**2, -0.5)
    return out if out.ndim else float(out)


def _chi2_conjugate_prime(zeta):
    zeta = np.asarray(zeta, dtype=float)
    out = np.maximum(1.0 + zeta, 0.0)
    return out if out.ndim else float(out)


def _chi2_conjugate_double_prime(zeta):
    zeta = np.asarray(zeta, dtype=float)
    out = np.where(zeta >= -1.0, 1.0, 0.0)
    return out if out.ndim else float(out)


def modified_chi2() -> PhiDivergence:
    """Modified chi-square divergence: ``phi(z) = (z - 1)^2 / 2`` on ``z >= 0``.

    Its conjugate is ``zeta + zeta^2/2`` for ``zeta >= -1`` and the constant
    ``-1/2`` below (the sup over ``z >= 0`` is pinned at ``z = 0`` there), so
    the derivative is the clipped-linear ``max(1 + zeta, 0)``.
    """
    return PhiDivergence(
        name="modified_chi2",
        phi=_chi2_phi,
        phi_prime=_chi2_phi_prime,
        phi_double_prime_at_1=1.0,
        conjugate=_chi2_conjugate,
        conjugate_prime=_chi2_conjugate_prime,
        conjugate_domain=(-np.inf, np.inf),
        conjugate_double_prime=_chi2_conjugate_double_prime,
    )


def as_distribution(weights, *, atol: float = 1e-12) -> np.ndarray:
    """Validate and return a probability vector as a float array.

    Entries must be finite, nonnegative (within ``-atol``), and sum to one
    within ``atol``.  Tiny negative round-off is clipped to zero; the sum is
    not rescaled.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("distribution must be a nonempty 1-d vector")
    if not np.all(np.isfinite(w)):
        raise ValidationError("distribution has non-finite entries")
    if np.any(w < -atol):
        raise ValidationError("distribution has negative entries")
    total = float(np.sum(w))
    if abs(total - 1.0) > atol:
        raise ValidationError(f"distribution sums to {total!r}, not 1")
    return np.clip(w, 0.0, None)


def divergence_value(q, p, div: PhiDivergence) -> float:
    """Compute ``sum_i p_i * phi(q_i / p_i)``.

    Points with ``p_i = 0`` contribute nothing when ``q_i = 0`` as well;
    ``q_i > 0`` off the support of ``p`` is rejected (the divergence is
    infinite there by convention and never wanted here).
    """
    q = as_distribution(q)
    p = as_distribution(p)
    if q.shape != p.shape:
        raise ValidationError("q and p must have matching length")
    off = (p == 0.0) & (q > 0.0)
    if np.any(off):
        raise ValidationError("q places mass outside the support of p")
    mask = p > 0.0
    vals = div.phi(q[mask] / p[mask])
    return float(np.sum(p[mask] * vals))
