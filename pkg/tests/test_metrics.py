import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mifoimpute import DataError, DataMatrix, evaluate_imputation, nmae, nrmse

from conftest import random_matrix


# ---------------------------------------------------------------------------
# Brute-force oracle: plain-Python reimplementation, kept deliberately naive
# and independent of the library's vectorized code paths.
# ---------------------------------------------------------------------------

def nrmse_brute(truth, imputed, positions):
    true_vals = [float(truth.values[i][j]) for i, j in positions]
    imp_vals = [float(imputed.values[i][j]) for i, j in positions]
    k = len(positions)
    mse = sum((t - x) ** 2 for t, x in zip(true_vals, imp_vals)) / k
    mean = sum(true_vals) / k
    var = sum((t - mean) ** 2 for t in true_vals) / k
    return math.sqrt(mse / var)


def nmae_brute(truth, imputed, positions):
    cols = sorted({j for _, j in positions})
    per_col = {}
    for col in cols:
        full = [float(truth.values[i][col]) for i in range(truth.n_rows)]
        col_range = max(full) - min(full)
        errs = [
            abs(float(imputed.values[i][j]) - float(truth.values[i][j]))
            for i, j in positions
            if j == col
        ]
        per_col[col] = sum(errs) / len(errs) / col_range
    overall = sum(per_col.values()) / len(per_col)
    return per_col, overall


def make_pair(rng, n=6, p=4):
    truth = random_matrix(rng, n, p)
    imputed = truth.with_values(truth.values + rng.standard_normal((n, p)))
    k = int(rng.integers(2, n * p // 2))
    flat = rng.choice(n * p, size=k, replace=False)
    positions = np.stack(np.unravel_index(flat, (n, p)), axis=1)
    return truth, imputed, positions


class TestWorkedValues:
    def test_nrmse_perfect(self):
        truth = DataMatrix([[1.0], [4.0]], np.zeros((2, 1), bool), ("a",))
        positions = [(0, 0), (1, 0)]
        assert nrmse(truth, truth, positions) == 0.0

    def test_nrmse_hand_computed(self):
        # truth {1, 4}, imputed {2, 3}: mse = 1, population var = 2.25
        truth = DataMatrix([[1.0], [4.0]], np.zeros((2, 1), bool), ("a",))
        imputed = DataMatrix([[2.0], [3.0]], np.zeros((2, 1), bool), ("a",))
        value = nrmse(truth, imputed, [(0, 0), (1, 0)])
        assert value == pytest.approx(math.sqrt(1 / 2.25), abs=1e-12)
        assert value == pytest.approx(0.666667, abs=1e-6)

    def test_nrmse_zero_variance_errors(self):
        truth = DataMatrix([[5.0], [5.0]], np.zeros((2, 1), bool), ("a",))
        imputed = DataMatrix([[1.0], [2.0]], np.zeros((2, 1), bool), ("a",))
        with pytest.raises(DataError, match="zero variance"):
            nrmse(truth, imputed, [(0, 0), (1, 0)])

    def test_nmae_hand_computed(self):
        # column range [0, 10]; true missing {2, 4}, imputed {3, 6}
        truth = DataMatrix(
            [[0.0], [10.0], [2.0], [4.0]], np.zeros((4, 1), bool), ("a",)
        )
        imputed = DataMatrix(
            [[0.0], [10.0], [3.0], [6.0]], np.zeros((4, 1), bool), ("a",)
        )
        per_col, overall = nmae(truth, imputed, [(2, 0), (3, 0)])
        assert per_col[0] == pytest.approx(0.15, abs=1e-9)
        assert overall == pytest.approx(0.15, abs=1e-9)

    def test_nmae_perfect(self, rng):
        truth = random_matrix(rng, 5, 3)
        per_col, overall = nmae(truth, truth, [(0, 0), (1, 2)])
        assert overall == 0.0
        assert per_col[0] == 0.0 and per_col[2] == 0.0
        assert np.isnan(per_col[1])

    def test_nmae_overall_is_mean_of_affected(self):
        truth = DataMatrix(
            [[0.0, 0.0], [10.0, 10.0], [2.0, 5.0]], np.zeros((3, 2), bool), ("a", "b")
        )
        imputed = DataMatrix(
            [[0.0, 0.0], [10.0, 10.0], [3.0, 8.0]], np.zeros((3, 2), bool), ("a", "b")
        )
        per_col, overall = nmae(truth, imputed, [(2, 0), (2, 1)])
        assert per_col[0] == pytest.approx(0.1)
        assert per_col[1] == pytest.approx(0.3)
        assert overall == pytest.approx(0.2)

    def test_nmae_constant_column_errors(self):
        truth = DataMatrix([[5.0], [5.0]], np.zeros((2, 1), bool), ("a",))
        with pytest.raises(DataError, match="constant"):
            nmae(truth, truth, [(0, 0)])

    def test_empty_positions_error(self, rng):
        truth = random_matrix(rng, 4, 2)
        with pytest.raises(DataError, match="nonempty"):
            nrmse(truth, truth, [])


class TestOracleEquivalence:
    def test_matches_brute_force_on_200_instances(self):
        rng = np.random.default_rng(1234)
        for _ in range(200):
            truth, imputed, positions = make_pair(rng)
            expected = nrmse_brute(truth, imputed, positions)
            got = nrmse(truth, imputed, positions)
            assert got == pytest.approx(expected, rel=1e-12)
            exp_cols, exp_overall = nmae_brute(truth, imputed, positions)
            got_cols, got_overall = nmae(truth, imputed, positions)
            assert got_overall == pytest.approx(exp_overall, rel=1e-12)
            for col, val in exp_cols.items():
                assert got_cols[col] == pytest.approx(val, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_row_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        truth, imputed, positions = make_pair(rng, n=7, p=3)
        perm = rng.permutation(7)
        inv = np.argsort(perm)
        truth_p = truth.with_values(truth.values[perm])
        imputed_p = imputed.with_values(imputed.values[perm])
        positions_p = np.column_stack([inv[positions[:, 0]], positions[:, 1]])
        assert nrmse(truth_p, imputed_p, positions_p) == pytest.approx(
            nrmse(truth, imputed, positions), rel=1e-12
        )
        _, overall = nmae(truth, imputed, positions)
        _, overall_p = nmae(truth_p, imputed_p, positions_p)
        assert overall_p == pytest.approx(overall, rel=1e-12)


class TestEvaluationReport:
    def test_report_consistency(self, rng):
        truth, imputed, positions = make_pair(rng)
        report = evaluate_imputation(truth, imputed, positions)
        assert report.nrmse == nrmse(truth, imputed, positions)
        per_col, overall = nmae(truth, imputed, positions)
        assert report.nmae_overall == overall
        assert np.array_equal(report.nmae_per_col, per_col, equal_nan=True)
        assert report.n_missing == len(positions)
        affected = np.unique(positions[:, 1])
        assert report.nmae_overall == pytest.approx(
            float(np.mean(report.nmae_per_col[affected]))
        )

    def test_shape_mismatch_rejected(self, rng):
        truth = random_matrix(rng, 4, 3)
        other = random_matrix(rng, 5, 3)
        with pytest.raises(DataError, match="shape"):
            nrmse(truth, other, [(0, 0)])
