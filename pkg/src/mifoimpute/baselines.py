"""Baseline imputers: column mean, k-nearest-neighbour rows, iterative low-rank
SVD completion, singular value thresholding, and local least squares."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import DataError, DataMatrix

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """An iterative solver diverged instead of converging."""


@dataclass(frozen=True)
class BaselineParams:
    """Tuning knobs shared by the baseline imputers.

    ``svt_tau=None`` resolves to 5*sqrt(n*p) and ``svt_step=None`` to
    1.2 * n * p / (number of observed entries) at run time.
    """

    knn_k: int = 10
    svd_rank: int = 5
    svd_max_iter: int = 100
    svd_tol: float = 1e-6
    svt_tau: float | None = None
    svt_step: float | None = None
    svt_max_iter: int = 200
    svt_tol: float = 1e-4
    lls_k: int = 15


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Truncated singular value decomposition: u @ diag(sigma) @ v.T."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def svd_decompose(a: np.ndarray, rank: int) -> SvdFactors:
    """Top-``rank`` singular triplets of a complete matrix.

    Singular values come back sorted descending and nonnegative; u and v have
    orthonormal columns.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DataError("expected a 2-dimensional matrix")
    if not np.isfinite(a).all():
        raise DataError("matrix contains non-finite entries")
    if not 1 <= rank <= min(a.shape):
        raise DataError(f"rank {rank} must be between 1 and {min(a.shape)}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(u=u[:, :rank], sigma=s[:rank], v=vt[:rank].T)


def svd_shrink(a: np.ndarray, tau: float) -> np.ndarray:
    """Soft-threshold the singular values of ``a`` by ``tau``."""
    a = np.asarray(a, dtype=np.float64)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return (u * np.maximum(s - tau, 0.0)) @ vt


def _min_norm_solve(a: np.ndarray, b: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares solution of a @ w = b via the SVD kernel."""
    fac = svd_decompose(a, min(a.shape))
    cutoff = rcond * fac.sigma[0]
    keep = fac.sigma > cutoff
    inv = np.zeros_like(fac.sigma)
    inv[keep] = 1.0 / fac.sigma[keep]
    return fac.v @ (inv * (fac.u.T @ b))


def mean_impute(m: DataMatrix) -> DataMatrix:
    """Replace every missing entry with its column's observed mean."""
    if m.is_complete:
        return m
    col_means = np.nanmean(m.values, axis=0)
    return m.with_values(np.where(m.mask, col_means[None, :], m.values))


def knn_impute(m: DataMatrix, k: int) -> DataMatrix:
    """Impute each missing entry from the k nearest rows that observe it.

    Row distance is the root mean square difference over mutually observed
    columns other than the target (at least one shared column required).
    Neighbors are weighted by inverse distance; ties are broken by row index.
    Entries with no usable neighbor fall back to the column mean and are
    logged.
    """
    if not 1 <= k < m.n_rows:
        raise DataError(f"knn_k must be in [1, {m.n_rows - 1}], got {k}")
    if m.is_complete:
        return m
    values, mask = m.values, m.mask
    observed = ~mask
    col_means = np.nanmean(values, axis=0)
    out = values.copy()
    for i, t in np.argwhere(mask):
        donors = np.flatnonzero(observed[:, t])
        # the matrix invariant guarantees at least one donor row exists
        mutual = observed[i][None, :] & observed[donors]
        shared = mutual.sum(axis=1)
        usable = shared > 0
        if not usable.any():
            out[i, t] = col_means[t]
            logger.warning(
                "knn: no donor shares an observed column with row %d for column "
                "'%s'; column-mean fallback", i, m.col_names[t],
            )
            continue
        donors = donors[usable]
        mutual = mutual[usable]
        shared = shared[usable]
        diff = np.where(mutual, values[donors] - values[i][None, :], 0.0)
        dist = np.sqrt((diff**2).sum(axis=1) / shared)
        nearest = np.lexsort((donors, dist))[:k]
        weights = 1.0 / (dist[nearest] + 1e-12)
        out[i, t] = float(
            np.dot(weights, values[donors[nearest], t]) / weights.sum()
        )
    return m.with_values(out)


def svd_impute(m: DataMatrix, params: BaselineParams = BaselineParams()) -> DataMatrix:
    """Iterative low-rank completion: repeatedly rebuild the masked entries
    from a rank-``svd_rank`` decomposition of the current working matrix.

    Starts from the column-mean fill and stops when the relative change of the
    masked entries drops below ``svd_tol`` or after ``svd_max_iter`` rounds.
    Observed entries never change.
    """
    if not 1 <= params.svd_rank <= min(m.shape):
        raise DataError(
            f"svd_rank {params.svd_rank} must be between 1 and {min(m.shape)}"
        )
    if m.is_complete:
        return m
    mask = m.mask
    work = mean_impute(m).values.copy()
    prev = work[mask].copy()
    for _ in range(params.svd_max_iter):
        approx = svd_decompose(work, params.svd_rank).reconstruct()
        cur = approx[mask]
        work[mask] = cur
        denom = max(float(np.linalg.norm(prev)), 1e-300)
        if float(np.linalg.norm(cur - prev)) / denom < params.svd_tol:
            break
        prev = cur.copy()
    return m.with_values(work)


def svt_impute(m: DataMatrix, params: BaselineParams = BaselineParams()) -> DataMatrix:
    """Matrix completion by singular value thresholding.

    Iterates M = shrink(Y, tau); Y += step * P_obs(X - M) from Y = 0, stopping
    when the relative residual on observed entries falls below ``svt_tol``.
    A residual growing 10x beyond its initial value raises ConvergenceError.
    """
    if m.is_complete:
        return m
    n, p = m.shape
    observed = ~m.mask
    x = np.where(observed, m.values, 0.0)
    tau = params.svt_tau if params.svt_tau is not None else 5.0 * math.sqrt(n * p)
    step = (
        params.svt_step
        if params.svt_step is not None
        else 1.2 * n * p / int(observed.sum())
    )
    if tau <= 0 or step <= 0:
        raise DataError("svt_tau and svt_step must be positive")
    norm_obs = float(np.linalg.norm(x))
    if norm_obs == 0.0:
        return m.with_values(x)
    y = np.zeros_like(x)
    approx = np.zeros_like(x)
    initial_rel = None
    for _ in range(params.svt_max_iter):
        approx = svd_shrink(y, tau)
        residual = np.where(observed, x - approx, 0.0)
        rel = float(np.linalg.norm(residual)) / norm_obs
        if initial_rel is None:
            initial_rel = rel
        if rel < params.svt_tol:
            break
        if rel > 10.0 * initial_rel:
            raise ConvergenceError(
                f"singular value thresholding diverged (relative residual {rel:.3g}); "
                "reduce svt_step"
            )
        y += step * residual
    return m.with_values(np.where(observed, m.values, approx))


def lls_impute(m: DataMatrix, params: BaselineParams = BaselineParams()) -> DataMatrix:
    """Local least squares: express each incomplete row as a linear combination
    of its nearest rows and carry the combination over to the missing columns.

    Neighbors must be fully observed on the row's observed columns; their
    values on the row's missing columns come from the column-mean fill.
    The combination is the minimum-norm least-squares fit of the row's
    observed part. Rows without any usable neighbor fall back to column
    means and are logged.
    """
    if not 1 <= params.lls_k < m.n_rows:
        raise DataError(f"lls_k must be in [1, {m.n_rows - 1}], got {params.lls_k}")
    low = np.flatnonzero((~m.mask).sum(axis=0) < 2)
    if low.size:
        raise DataError(
            f"column '{m.col_names[low[0]]}' has fewer than 2 observed entries"
        )
    if m.is_complete:
        return m
    values, mask = m.values, m.mask
    filled = mean_impute(m).values
    col_means = np.nanmean(values, axis=0)
    out = values.copy()
    for i in np.flatnonzero(mask.any(axis=1)):
        mis_cols = np.flatnonzero(mask[i])
        obs_cols = np.flatnonzero(~mask[i])
        candidates = (~mask[:, obs_cols]).all(axis=1)
        candidates[i] = False
        candidates = np.flatnonzero(candidates)
        if candidates.size == 0 or obs_cols.size == 0:
            out[i, mis_cols] = col_means[mis_cols]
            logger.warning(
                "lls: row %d has no fully comparable neighbor; column-mean fallback",
                i,
            )
            continue
        dist = np.linalg.norm(
            values[np.ix_(candidates, obs_cols)] - values[i, obs_cols][None, :],
            axis=1,
        )
        nearest = candidates[np.lexsort((candidates, dist))[: params.lls_k]]
        basis = values[np.ix_(nearest, obs_cols)]
        weights = _min_norm_solve(basis.T, values[i, obs_cols])
        out[i, mis_cols] = weights @ filled[np.ix_(nearest, mis_cols)]
    return m.with_values(out)
