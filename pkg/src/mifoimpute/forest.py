"""Regression random forest: bagged CART trees with per-node feature subsampling.

Trees are grown unpruned to a minimum node size, splitting on the midpoint
between consecutive sorted values that maximizes the reduction in the sum of
squared deviations. Every tree draws its bootstrap sample and its per-node
candidate columns from a private generator seeded by (forest seed, tree index),
so a fitted forest is a pure function of (X, y, params) regardless of how many
threads build it.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .data import DataError, seed_sequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters.

    ``mtry=None`` resolves to floor(sqrt(number of predictors)), at least 1,
    at fit time.
    """

    ntree: int = 100
    mtry: int | None = None
    min_node_size: int = 5
    seed: int = 0

    def resolved_mtry(self, n_predictors: int) -> int:
        if self.mtry is None:
            return max(1, math.isqrt(n_predictors))
        return self.mtry


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """One CART regression tree in flat-array form.

    ``feature[k] == -1`` marks node k as a leaf whose prediction is
    ``value[k]``, the mean response of the rows that reached it. ``in_bag``
    is the bootstrap multiset of training row indices the tree was grown on.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    in_bag: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return _predict_kernel(
            self.feature, self.threshold, self.left, self.right, self.value,
            np.ascontiguousarray(x, dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class RegressionForest:
    trees: tuple[RegressionTree, ...]
    params: ForestParams
    n_features: int
    n_train_rows: int
    oob_mse: float


@njit(cache=True, nogil=True)
def _grow_kernel(x, y, cand, min_node_size):  # pragma: no cover - compiled
    n = x.shape[0]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)

    order = np.arange(n)
    stack = np.empty((max_nodes, 3), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    top = 1
    n_nodes = 1
    xbuf = np.empty(n, dtype=np.float64)
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        m = end - start
        total = 0.0
        for i in range(start, end):
            total += y[order[i]]
        value[node] = total / m
        if m <= min_node_size:
            continue
        pure = True
        y0 = y[order[start]]
        for i in range(start + 1, end):
            if y[order[i]] != y0:
                pure = False
                break
        if pure:
            continue
        # candidate columns are sorted ascending, so on equal scores the
        # lowest column index and then the lowest threshold win
        best_score = -np.inf
        best_col = -1
        best_thr = 0.0
        for ci in range(cand.shape[1]):
            col = cand[node, ci]
            for i in range(m):
                xbuf[i] = x[order[start + i], col]
            sort_idx = np.argsort(xbuf[:m])
            cum = 0.0
            for i in range(m - 1):
                oi = sort_idx[i]
                cum += y[order[start + oi]]
                xa = xbuf[oi]
                xb = xbuf[sort_idx[i + 1]]
                if xb > xa:
                    n_left = i + 1
                    n_right = m - n_left
                    rest = total - cum
                    score = cum * cum / n_left + rest * rest / n_right
                    if score > best_score:
                        best_score = score
                        best_col = col
                        best_thr = 0.5 * (xa + xb)
        if best_col < 0:
            continue
        n_lo = 0
        n_hi = 0
        for i in range(start, end):
            row = order[i]
            if x[row, best_col] <= best_thr:
                lo[n_lo] = row
                n_lo += 1
            else:
                hi[n_hi] = row
                n_hi += 1
        for i in range(n_lo):
            order[start + i] = lo[i]
        for i in range(n_hi):
            order[start + n_lo + i] = hi[i]
        feature[node] = best_col
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack[top, 0] = right_id
        stack[top, 1] = start + n_lo
        stack[top, 2] = end
        top += 1
        stack[top, 0] = left_id
        stack[top, 1] = start
        stack[top, 2] = start + n_lo
        top += 1
    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
    )


@njit(cache=True, nogil=True)
def _predict_kernel(feature, threshold, left, right, value, x):  # pragma: no cover
    m = x.shape[0]
    out = np.empty(m, dtype=np.float64)
    for i in range(m):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _candidate_columns(
    rng: np.random.Generator, n_predictors: int, mtry: int, n_nodes: int
) -> np.ndarray:
    """One row of mtry distinct columns per potential node, sorted ascending."""
    u = rng.random((n_nodes, n_predictors))
    return np.sort(np.argsort(u, axis=1)[:, :mtry], axis=1)


def _fit_tree(
    x: np.ndarray, y: np.ndarray, seed: int, tree_index: int, mtry: int,
    min_node_size: int,
) -> RegressionTree:
    rng = np.random.default_rng(seed_sequence(seed, tree_index))
    n = x.shape[0]
    boot = rng.integers(0, n, size=n)
    cand = _candidate_columns(rng, x.shape[1], mtry, 2 * n + 1)
    feature, threshold, left, right, value = _grow_kernel(
        x[boot], y[boot], np.ascontiguousarray(cand), min_node_size
    )
    return RegressionTree(feature, threshold, left, right, value, in_bag=boot)


def fit_forest(
    x: np.ndarray, y: np.ndarray, params: ForestParams, n_threads: int = 1
) -> RegressionForest:
    """Fit ``params.ntree`` trees, each on its own bootstrap sample of (x, y).

    The result is bitwise identical for any ``n_threads``; threads only speed
    up tree construction.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DataError("predictor matrix must be 2-dimensional and nonempty")
    if y.shape != (x.shape[0],):
        raise DataError(
            f"response length {y.shape} does not match {x.shape[0]} rows"
        )
    if not np.isfinite(x).all():
        raise DataError("predictor matrix contains non-finite values")
    if not np.isfinite(y).all():
        raise DataError("response contains non-finite values")
    if params.ntree < 1:
        raise DataError("ntree must be at least 1")
    if params.min_node_size < 1:
        raise DataError("min_node_size must be at least 1")
    mtry = params.resolved_mtry(x.shape[1])
    if not 1 <= mtry <= x.shape[1]:
        raise DataError(
            f"mtry {mtry} must be between 1 and {x.shape[1]} predictors"
        )

    def build(t: int) -> RegressionTree:
        return _fit_tree(x, y, params.seed, t, mtry, params.min_node_size)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            trees = tuple(pool.map(build, range(params.ntree)))
    else:
        trees = tuple(build(t) for t in range(params.ntree))
    forest = RegressionForest(
        trees=trees,
        params=params,
        n_features=x.shape[1],
        n_train_rows=x.shape[0],
        oob_mse=float("nan"),
    )
    return replace(forest, oob_mse=oob_error(forest, x, y))


def predict_forest(forest: RegressionForest, x_new: np.ndarray) -> np.ndarray:
    """Mean over trees of the leaf value each row reaches.

    Trees are aggregated in index order, so predictions do not depend on any
    parallelism used during fitting.
    """
    x_new = np.ascontiguousarray(x_new, dtype=np.float64)
    if x_new.ndim != 2 or x_new.shape[1] != forest.n_features:
        raise DataError(
            f"expected {forest.n_features} predictor columns, got shape {x_new.shape}"
        )
    if not np.isfinite(x_new).all():
        raise DataError("prediction input contains non-finite values")
    acc = np.zeros(x_new.shape[0], dtype=np.float64)
    for tree in forest.trees:
        acc += tree.predict(x_new)
    return acc / len(forest.trees)


def oob_predictions(
    forest: RegressionForest, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-bag aggregated predictions over the training rows.

    Returns ``(pred, n_oob_trees)``; ``pred`` is NaN for rows that were in
    every tree's bootstrap sample.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if n != forest.n_train_rows:
        raise DataError("out-of-bag evaluation requires the training rows")
    sums = np.zeros(n, dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)
    for tree in forest.trees:
        in_bag = np.bincount(tree.in_bag, minlength=n)
        oob_rows = np.flatnonzero(in_bag == 0)
        if oob_rows.size:
            sums[oob_rows] += tree.predict(x[oob_rows])
            counts[oob_rows] += 1
    pred = np.full(n, np.nan)
    hit = counts > 0
    pred[hit] = sums[hit] / counts[hit]
    return pred, counts


def oob_error(forest: RegressionForest, x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error of OOB-aggregated predictions.

    Rows that were never out of bag are excluded; if no row ever was (tiny
    ntree), the error is undefined and NaN is returned with a warning.
    """
    y = np.asarray(y, dtype=np.float64)
    pred, counts = oob_predictions(forest, x)
    hit = counts > 0
    if not hit.any():
        logger.warning("no training row was ever out of bag; OOB error undefined")
        return float("nan")
    return float(np.mean((pred[hit] - y[hit]) ** 2))
