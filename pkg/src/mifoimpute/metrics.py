"""Imputation error metrics: variance-normalized RMSE and range-normalized MAE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, DataMatrix


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Scores comparing imputed values against ground truth at masked positions.

    ``nmae_per_col`` holds NaN for columns that had no missing entries;
    ``nmae_overall`` averages only the affected columns.
    """

    nrmse: float
    nmae_per_col: np.ndarray
    nmae_overall: float
    n_missing: int


def _checked_positions(
    truth: DataMatrix, imputed: DataMatrix, positions
) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.int64)
    if pos.size == 0:
        raise DataError("positions must be nonempty")
    pos = pos.reshape(-1, 2)
    if truth.shape != imputed.shape:
        raise DataError(
            f"truth shape {truth.shape} does not match imputed shape {imputed.shape}"
        )
    n, p = truth.shape
    if (pos < 0).any() or (pos[:, 0] >= n).any() or (pos[:, 1] >= p).any():
        raise DataError("a position is out of range")
    rows, cols = pos[:, 0], pos[:, 1]
    if truth.mask[rows, cols].any():
        raise DataError("truth is masked at a scored position")
    if imputed.mask[rows, cols].any():
        raise DataError("imputed matrix is masked at a scored position")
    return pos


def nrmse(truth: DataMatrix, imputed: DataMatrix, positions) -> float:
    """Root mean squared error over ``positions``, normalized by the variance
    of the true values at those positions (population convention, divide by N).

    0 means perfect imputation; filling with the mean of the missing set
    scores about 1.
    """
    pos = _checked_positions(truth, imputed, positions)
    t = truth.values[pos[:, 0], pos[:, 1]]
    x = imputed.values[pos[:, 0], pos[:, 1]]
    var = float(np.var(t))
    if var <= 0.0:
        raise DataError("true values at the scored positions have zero variance")
    return float(np.sqrt(np.mean((t - x) ** 2) / var))


def nmae(
    truth: DataMatrix, imputed: DataMatrix, positions
) -> tuple[np.ndarray, float]:
    """Per-column mean absolute error normalized by the column's full true range.

    Returns ``(nmae_per_col, nmae_overall)`` where the per-column array holds
    NaN for columns without scored positions and the overall value is the
    plain mean over affected columns.
    """
    pos = _checked_positions(truth, imputed, positions)
    per_col = np.full(truth.n_cols, np.nan)
    affected = np.unique(pos[:, 1])
    for col in affected:
        if truth.mask[:, col].any():
            raise DataError(
                f"column '{truth.col_names[col]}' of the truth matrix is not complete"
            )
        full = truth.values[:, col]
        col_range = float(full.max() - full.min())
        if col_range <= 0.0:
            raise DataError(
                f"column '{truth.col_names[col]}' is constant; its range "
                "cannot normalize an error"
            )
        rows = pos[pos[:, 1] == col, 0]
        t = truth.values[rows, col]
        x = imputed.values[rows, col]
        per_col[col] = float(np.mean(np.abs(x - t)) / col_range)
    per_col.flags.writeable = False
    return per_col, float(per_col[affected].mean())


def evaluate_imputation(
    truth: DataMatrix, imputed: DataMatrix, positions
) -> EvaluationReport:
    """Score an imputation with both metrics over the given masked positions."""
    pos = _checked_positions(truth, imputed, positions)
    per_col, overall = nmae(truth, imputed, pos)
    return EvaluationReport(
        nrmse=nrmse(truth, imputed, pos),
        nmae_per_col=per_col,
        nmae_overall=overall,
        n_missing=pos.shape[0],
    )
