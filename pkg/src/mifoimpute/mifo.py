"""Iterative random-forest imputation with an out-of-bag error estimate.

Columns are visited in order of increasing missingness. Each incomplete
column is regressed on all other columns (at their current, partly imputed
values) with a regression forest fitted on the rows where the column is
observed; predictions fill the missing rows immediately, so later columns in
the same sweep see the update. Sweeps repeat until the relative squared
change between successive matrices increases for the first time, at which
point the previous sweep's matrix is returned, or until ``max_iter`` sweeps
have run (returned non-converged).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .baselines import mean_impute
from .data import DataError, DataMatrix, seed_sequence
from .forest import ForestParams, fit_forest, oob_predictions, predict_forest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MifoParams:
    forest: ForestParams = ForestParams()
    max_iter: int = 10
    initial_guess: str = "column_mean"


@dataclass(frozen=True, eq=False)
class ImputationResult:
    """Completed matrix plus the iteration trace and error estimates.

    ``converged`` is False when the sweep limit was hit before the stopping
    rule fired. ``per_column_oob_mse`` holds NaN for columns that had nothing
    to impute (and for columns whose forest never left a row out of bag).
    """

    imputed: DataMatrix
    delta_trace: tuple[float, ...]
    iterations_run: int
    converged: bool
    oob_nrmse_estimate: float
    oob_nmae_estimate: float
    per_column_oob_mse: np.ndarray


def sort_columns_by_missingness(m: DataMatrix) -> list[int]:
    """Column indices sorted by ascending missing count, ties by index.

    Complete columns sort first; the imputation loop skips them.
    """
    return [int(c) for c in np.argsort(m.missing_per_col(), kind="stable")]


def initial_guess(m: DataMatrix) -> DataMatrix:
    """Column-mean starting point for the iterative loop."""
    return mean_impute(m)


def _delta(new: np.ndarray, old: np.ndarray) -> float:
    denom = float(np.sum(new * new))
    if denom <= 0.0:
        raise DataError("change ratio undefined: new matrix is all zeros")
    return float(np.sum((new - old) ** 2) / denom)


def delta_n(new: DataMatrix, old: DataMatrix) -> float:
    """Relative squared change between two complete matrices.

    Sum of squared entry differences divided by the sum of squared entries of
    the new matrix; the stopping statistic of the iterative loop.
    """
    if new.shape != old.shape:
        raise DataError(f"shape mismatch: {new.shape} vs {old.shape}")
    if not new.is_complete or not old.is_complete:
        raise DataError("both matrices must be complete")
    return _delta(new.values, old.values)


def _sweep_seed(base: int, sweep: int, col: int) -> int:
    """Fresh forest seed per (sweep, column), derived from the base seed."""
    return int(seed_sequence(base, sweep, col).generate_state(1, np.uint64)[0])


def mifo_impute(
    m: DataMatrix, params: MifoParams = MifoParams(), n_threads: int = 1
) -> ImputationResult:
    """Impute all missing entries of ``m`` with the iterative forest scheme.

    Requires at least 2 columns and at least 2 observed entries in every
    incomplete column. Deterministic for fixed (m, params) at any thread
    count. Observed entries are preserved exactly.
    """
    n, p = m.shape
    if p < 2:
        raise DataError("need at least 2 columns so every target has a predictor")
    if params.max_iter < 1:
        raise DataError("max_iter must be at least 1")
    if params.initial_guess != "column_mean":
        raise DataError(f"unknown initial guess '{params.initial_guess}'")
    observed_per_col = (~m.mask).sum(axis=0)
    incomplete = np.flatnonzero(m.mask.any(axis=0))
    thin = incomplete[observed_per_col[incomplete] < 2]
    if thin.size:
        raise DataError(
            f"column '{m.col_names[thin[0]]}' has fewer than 2 observed entries"
        )
    if incomplete.size == 0:
        return ImputationResult(
            imputed=m,
            delta_trace=(),
            iterations_run=0,
            converged=True,
            oob_nrmse_estimate=float("nan"),
            oob_nmae_estimate=float("nan"),
            per_column_oob_mse=np.full(p, np.nan),
        )

    targets = [t for t in sort_columns_by_missingness(m) if m.mask[:, t].any()]
    rows_obs = {t: np.flatnonzero(~m.mask[:, t]) for t in targets}
    rows_mis = {t: np.flatnonzero(m.mask[:, t]) for t in targets}
    predictors = {t: np.delete(np.arange(p), t) for t in targets}

    work = initial_guess(m).values.copy()
    trace: list[float] = []
    prev_stats: dict[int, tuple[float, float]] = {}
    stats: dict[int, tuple[float, float]] = {}
    converged = False
    result_values = work
    result_stats = stats
    for sweep in range(1, params.max_iter + 1):
        old = work.copy()
        stats = {}
        for t in targets:
            obs, mis, cols = rows_obs[t], rows_mis[t], predictors[t]
            x_obs = work[np.ix_(obs, cols)]
            y_obs = work[obs, t]
            forest_params = replace(
                params.forest, seed=_sweep_seed(params.forest.seed, sweep, t)
            )
            try:
                forest = fit_forest(x_obs, y_obs, forest_params, n_threads=n_threads)
                work[mis, t] = predict_forest(forest, work[np.ix_(mis, cols)])
            except DataError as exc:
                raise DataError(
                    f"imputing column '{m.col_names[t]}': {exc}"
                ) from exc
            pred, counts = oob_predictions(forest, x_obs)
            hit = counts > 0
            if hit.any():
                residual = pred[hit] - y_obs[hit]
                stats[t] = (
                    float(np.mean(residual**2)),
                    float(np.mean(np.abs(residual))),
                )
            else:
                stats[t] = (float("nan"), float("nan"))
        delta = _delta(work, old)
        trace.append(delta)
        logger.debug("sweep %d: delta = %.6g", sweep, delta)
        if len(trace) >= 2 and delta > trace[-2]:
            converged = True
            result_values = old
            result_stats = prev_stats
            break
        prev_stats = stats
    if not converged:
        result_values = work
        result_stats = stats
        logger.info(
            "stopping rule did not fire within %d sweeps; returning the last matrix",
            params.max_iter,
        )

    per_col_mse = np.full(p, np.nan)
    for t in targets:
        per_col_mse[t] = result_stats[t][0]
    oob_nrmse, oob_nmae = _aggregate_oob(m, targets, rows_obs, rows_mis, result_stats)
    per_col_mse.flags.writeable = False
    return ImputationResult(
        imputed=m.with_values(result_values),
        delta_trace=tuple(trace),
        iterations_run=len(trace),
        converged=converged,
        oob_nrmse_estimate=oob_nrmse,
        oob_nmae_estimate=oob_nmae,
        per_column_oob_mse=per_col_mse,
    )


def _aggregate_oob(
    m: DataMatrix,
    targets: list[int],
    rows_obs: dict[int, np.ndarray],
    rows_mis: dict[int, np.ndarray],
    stats: dict[int, tuple[float, float]],
) -> tuple[float, float]:
    """Pool per-column OOB residuals into matrix-level error estimates.

    Columns are weighted by their missing counts. The squared errors are
    normalized by the pooled population variance of the observed values of
    all incomplete columns; the absolute errors by each column's observed
    range.
    """
    usable = [t for t in targets if np.isfinite(stats[t][0])]
    if not usable:
        return float("nan"), float("nan")
    weights = np.array([rows_mis[t].size for t in usable], dtype=np.float64)
    weights /= weights.sum()
    pooled = np.concatenate([m.values[rows_obs[t], t] for t in targets])
    pooled_var = float(np.var(pooled))
    if pooled_var > 0.0:
        mean_mse = float(np.dot(weights, [stats[t][0] for t in usable]))
        oob_nrmse = float(np.sqrt(mean_mse / pooled_var))
    else:
        oob_nrmse = float("nan")
    terms = []
    term_weights = []
    for t, w in zip(usable, weights):
        col = m.values[rows_obs[t], t]
        col_range = float(col.max() - col.min())
        if col_range > 0.0:
            terms.append(stats[t][1] / col_range)
            term_weights.append(w)
    if terms:
        tw = np.asarray(term_weights)
        oob_nmae = float(np.dot(tw / tw.sum(), terms))
    else:
        oob_nmae = float("nan")
    return oob_nrmse, oob_nmae
