"""Monte-Carlo orchestration for the order-quantity experiments.

Reproduces the four statistical artifacts: the out-of-sample expected-reward
curve over the penalty grid, the averaged in-sample mean-sensitivity and
out-of-sample mean-variance frontiers, and the bootstrap distribution of the
estimated optimal penalty strength.

Determinism contract: all randomness flows through counter-based streams
derived from ``master_seed`` via ``stream(master_seed, tag, index, sub)``
(key = [master_seed, tag<<48 | index<<20 | sub]); per-dataset work writes to
preallocated rows and aggregation operates on fully materialized arrays, so
outputs are byte-identical for a fixed config and seed regardless of any
thread count.

Out-of-sample evaluation uses the exact closed-form population moments of
the truncated-mixture demand (no fresh-draw evaluation noise).  Bootstrap
estimates train on each with-replacement resample and score on the original
dataset's empirical measure; this estimator choice is recorded in run
metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .divergence import modified_chi2
from .errors import SolverError, UnsupportedModelError, ValidationError
from .models import DemandMixtureParams, InventoryParams, sample_demand_values

TAG_SWEEP_DATA = 1
TAG_BOOT_DATA = 2
TAG_BOOT_IDX = 3
TAG_INPUT_SAMPLE = 4
TAG_POPULATION = 5

_GRID_LOG10_MIN = -5.0
_GRID_LOG10_MAX = -1.0
_GRID_POINTS_PER_SIDE = 81


def stream(master_seed: int, tag: int, index: int = 0, sub: int = 0):
    """Deterministic counter-based generator for one unit of work."""
    if not 0 <= int(master_seed) < 1 << 64:
        raise ValidationError("master_seed must be in [0, 2^64)")
    if not (0 <= tag < 1 << 16 and 0 <= index < 1 << 28 and 0 <= sub < 1 << 20):
        raise ValidationError("stream coordinates out of range")
    mix = (int(tag) << 48) | (int(index) << 20) | int(sub)
    key = np.array([int(master_seed), mix], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def default_delta_grid(
    log10_min: float = _GRID_LOG10_MIN,
    log10_max: float = _GRID_LOG10_MAX,
    points_per_side: int = _GRID_POINTS_PER_SIDE,
) -> np.ndarray:
    """Log-spaced grid over both penalty signs plus zero, sorted ascending."""
    if points_per_side < 1:
        raise ValidationError("need at least one grid point per side")
    if not (math.isfinite(log10_min) and math.isfinite(log10_max)):
        raise ValidationError("grid exponents must be finite")
    if log10_min >= log10_max:
        raise ValidationError("grid needs log10_min < log10_max")
    side = np.logspace(log10_min, log10_max, points_per_side)
    return np.concatenate([-side[::-1], [0.0], side])


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Inputs of one experiment run; immutable and validated on creation."""

    demand: DemandMixtureParams
    inventory: InventoryParams
    n: int
    n_datasets: int
    delta_grid: np.ndarray
    bootstrap_resamples: int = 50
    bootstrap_datasets: int = 500
    master_seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.n_datasets < 1:
            raise ValidationError("n and n_datasets must be >= 1")
        if self.bootstrap_resamples < 2:
            raise ValidationError("bootstrap needs at least 2 resamples")
        if self.bootstrap_datasets < 1:
            raise ValidationError("bootstrap needs at least 1 dataset")
        if not 0 <= int(self.master_seed) < 1 << 64:
            raise ValidationError("master_seed must be in [0, 2^64)")
        if self.demand.m < 0.0:
            raise UnsupportedModelError(
                "closed-form population moments need a nonnegative demand mode"
            )
        grid = np.asarray(self.delta_grid, dtype=float).copy()
        if grid.ndim != 1 or grid.size == 0:
            raise ValidationError("delta_grid must be a nonempty 1-D array")
        if not np.all(np.isfinite(grid)):
            raise ValidationError("delta_grid contains non-finite values")
        if np.any(np.diff(grid) <= 0.0):
            raise ValidationError("delta_grid must be strictly increasing")
        if not np.any(grid == 0.0):
            raise ValidationError("delta_grid must contain 0")
        grid.setflags(write=False)
        object.__setattr__(self, "delta_grid", grid)


@dataclass(frozen=True, eq=False)
class SweepResults:
    """Per-dataset, per-delta arrays from one dataset sweep."""

    xs: np.ndarray
    in_mean: np.ndarray
    in_var: np.ndarray
    oos_mean: np.ndarray
    oos_var: np.ndarray
    keep: np.ndarray
    exclusion_rate: float

    @property
    def n_kept(self) -> int:
        return int(np.count_nonzero(self.keep))


@dataclass(frozen=True, eq=False)
class CurveEstimate:
    """Averaged out-of-sample expected-reward curve over the penalty grid."""

    delta_grid: np.ndarray
    mean_curve: np.ndarray
    std_error: np.ndarray | None
    argmax_delta: float
    argmax_value: float
    n_kept: int
    exclusion_rate: float

    def summary_dict(self) -> dict:
        return {
            "value_at_zero": float(
                self.mean_curve[int(np.nonzero(self.delta_grid == 0.0)[0][0])]
            ),
            "argmax_delta": self.argmax_delta,
            "argmax_value": self.argmax_value,
            "n_kept": self.n_kept,
            "exclusion_rate": self.exclusion_rate,
        }


@dataclass(frozen=True, eq=False)
class AveragedFrontiers:
    """Per-delta averages of the in/out-of-sample frontier coordinates."""

    delta_grid: np.ndarray
    in_sample_mean: np.ndarray
    sensitivity: np.ndarray
    oos_mean: np.ndarray
    oos_variance: np.ndarray
    n_kept: int
    exclusion_rate: float

    @property
    def in_sample_frontier(self):
        return self.delta_grid, self.in_sample_mean, self.sensitivity

    @property
    def out_of_sample_frontier(self):
        return self.delta_grid, self.oos_mean, self.oos_variance

    @property
    def sensitivity_curve(self):
        return self.delta_grid, self.sensitivity


@dataclass(frozen=True, eq=False)
class BootstrapSummary:
    """Distribution of per-dataset bootstrap estimates of the optimal delta."""

    delta_grid: np.ndarray
    estimates: np.ndarray
    counts: np.ndarray
    mean: float
    sd: float
    fraction_negative: float
    n_kept: int
    exclusion_rate: float

    def summary_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "fraction_negative": self.fraction_negative,
            "n_kept": self.n_kept,
            "exclusion_rate": self.exclusion_rate,
        }


def _argmax_smallest_abs(grid: np.ndarray, values: np.ndarray) -> int:
    """Index of the maximum; exact ties break toward the smallest |delta|
    (negative sign first among equal magnitudes)."""
    best = values.max()
    ties = np.nonzero(values == best)[0]
    if ties.size == 1:
        return int(ties[0])
    order = np.lexsort((grid[ties], np.abs(grid[ties])))
    return int(ties[order[0]])


def _dataset_matrix(config: ExperimentConfig, tag: int, count: int) -> np.ndarray:
    out = np.empty((count, config.n))
    for d in range(count):
        out[d] = sample_demand_values(
            config.demand, config.n, stream(config.master_seed, tag, d)
        )
    return out


def _check_exclusion(keep: np.ndarray, what: str) -> float:
    rate = 1.0 - float(np.count_nonzero(keep)) / keep.size
    if rate >= 0.01:
        raise SolverError(
            f"{what}: solver exclusion rate {rate:.2%} breaches the 1% budget",
            exclusion_rate=rate,
        )
    return rate


def run_sweep(config: ExperimentConfig) -> SweepResults:
    """Solve the delta family on every dataset and score each solution."""
    Y = _dataset_matrix(config, TAG_SWEEP_DATA, config.n_datasets)
    xs, in_mean, in_var, oos_mean, oos_var = kernels.newsvendor_sweep(
        Y, config.delta_grid, config.inventory, config.demand
    )
    stacked = np.stack([xs, in_mean, in_var, oos_mean, oos_var])
    keep = np.all(np.isfinite(stacked), axis=(0, 2))
    rate = _check_exclusion(keep, "dataset sweep")
    return SweepResults(
        xs=xs,
        in_mean=in_mean,
        in_var=in_var,
        oos_mean=oos_mean,
        oos_var=oos_var,
        keep=keep,
        exclusion_rate=rate,
    )


def out_of_sample_curve(
    config: ExperimentConfig, sweep: SweepResults | None = None
) -> CurveEstimate:
    """Average conditional expected reward of the solution family."""
    sweep = run_sweep(config) if sweep is None else sweep
    rows = sweep.oos_mean[sweep.keep]
    mean_curve = rows.mean(axis=0)
    if rows.shape[0] > 1:
        std_error = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    else:
        std_error = None
    gi = _argmax_smallest_abs(config.delta_grid, mean_curve)
    return CurveEstimate(
        delta_grid=config.delta_grid,
        mean_curve=mean_curve,
        std_error=std_error,
        argmax_delta=float(config.delta_grid[gi]),
        argmax_value=float(mean_curve[gi]),
        n_kept=rows.shape[0],
        exclusion_rate=sweep.exclusion_rate,
    )


def averaged_frontiers(
    config: ExperimentConfig, sweep: SweepResults | None = None
) -> AveragedFrontiers:
    """Per-delta averages of the in- and out-of-sample frontier coordinates."""
    sweep = run_sweep(config) if sweep is None else sweep
    keep = sweep.keep
    phi_dd = modified_chi2().phi_double_prime_at_1
    return AveragedFrontiers(
        delta_grid=config.delta_grid,
        in_sample_mean=sweep.in_mean[keep].mean(axis=0),
        sensitivity=(sweep.in_var[keep] / phi_dd).mean(axis=0),
        oos_mean=sweep.oos_mean[keep].mean(axis=0),
        oos_variance=sweep.oos_var[keep].mean(axis=0),
        n_kept=sweep.n_kept,
        exclusion_rate=sweep.exclusion_rate,
    )


def bootstrap_delta(config: ExperimentConfig) -> BootstrapSummary:
    """Bootstrap distribution of the estimated optimal penalty strength.

    Per dataset: draw ``bootstrap_resamples`` with-replacement resamples,
    solve the family on each, score every solution on the original dataset's
    empirical measure, average the curves, and take the argmax delta (exact
    ties toward smallest |delta|).
    """
    D = config.bootstrap_datasets
    Y = _dataset_matrix(config, TAG_BOOT_DATA, D)
    idx = np.empty((D, config.bootstrap_resamples, config.n), dtype=np.int64)
    for d in range(D):
        gen = stream(config.master_seed, TAG_BOOT_IDX, d)
        idx[d] = gen.integers(
            0, config.n, size=(config.bootstrap_resamples, config.n), dtype=np.int64
        )
    curves = kernels.newsvendor_bootstrap(Y, idx, config.delta_grid, config.inventory)
    keep = np.all(np.isfinite(curves), axis=1)
    rate = _check_exclusion(keep, "bootstrap")
    kept = curves[keep]
    estimates = np.array(
        [
            config.delta_grid[_argmax_smallest_abs(config.delta_grid, row)]
            for row in kept
        ]
    )
    counts = np.array(
        [int(np.count_nonzero(estimates == g)) for g in config.delta_grid],
        dtype=np.int64,
    )
    sd = float(estimates.std(ddof=1)) if estimates.size > 1 else 0.0
    return BootstrapSummary(
        delta_grid=config.delta_grid,
        estimates=estimates,
        counts=counts,
        mean=float(estimates.mean()),
        sd=sd,
        fraction_negative=float(np.count_nonzero(estimates < 0.0) / estimates.size),
        n_kept=int(estimates.size),
        exclusion_rate=rate,
    )


# -- CSV serialization --------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header: list[str], rows) -> None:
    """Write rows with full round-trip float precision and LF newlines."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def write_figure1(path, curve: CurveEstimate) -> None:
    if curve.std_error is None:
        write_csv(
            path,
            ["delta", "mean_reward"],
            zip(curve.delta_grid, curve.mean_curve),
        )
    else:
        write_csv(
            path,
            ["delta", "mean_reward", "std_error"],
            zip(curve.delta_grid, curve.mean_curve, curve.std_error),
        )


def write_figure2a(path, fronts: AveragedFrontiers) -> None:
    grid, sens = fronts.sensitivity_curve
    write_csv(path, ["delta", "sensitivity"], zip(grid, sens))


def write_figure2b(path, fronts: AveragedFrontiers) -> None:
    grid, mean, sens = fronts.in_sample_frontier
    write_csv(
        path, ["delta", "in_sample_mean", "sensitivity"], zip(grid, mean, sens)
    )


def write_figure2c(path, fronts: AveragedFrontiers) -> None:
    grid, mean, var = fronts.out_of_sample_frontier
    write_csv(path, ["delta", "oos_mean", "oos_variance"], zip(grid, mean, var))


def write_figure2d(path, summary: BootstrapSummary) -> None:
    write_csv(path, ["delta", "count"], zip(summary.delta_grid, summary.counts))
