import numpy as np
import pytest

from mifoimpute import (
    CsvParseError,
    DataError,
    DataMatrix,
    column_split,
    inject_missing,
    load_csv,
    write_csv,
)

from conftest import random_matrix


class TestDataMatrix:
    def test_masked_entries_become_nan(self):
        m = DataMatrix([[1.0, 2.0], [3.0, 4.0]], [[False, True], [False, False]], ("a", "b"))
        assert np.isnan(m.values[0, 1])
        assert m.n_missing == 1
        assert not m.is_complete

    def test_rejects_single_row(self):
        with pytest.raises(DataError, match="2 rows"):
            DataMatrix([[1.0, 2.0]], [[False, False]], ("a", "b"))

    def test_rejects_fully_missing_column(self):
        with pytest.raises(DataError, match="fully missing"):
            DataMatrix([[1.0, 2.0], [3.0, 4.0]], [[False, True], [False, True]], ("a", "b"))

    def test_rejects_duplicate_and_empty_names(self):
        with pytest.raises(DataError, match="unique"):
            DataMatrix(np.ones((2, 2)), np.zeros((2, 2), bool), ("a", "a"))
        with pytest.raises(DataError, match="unique"):
            DataMatrix(np.ones((2, 2)), np.zeros((2, 2), bool), ("a", ""))

    def test_rejects_nonfinite_observed(self):
        with pytest.raises(DataError, match="finite"):
            DataMatrix([[1.0, np.inf], [3.0, 4.0]], np.zeros((2, 2), bool), ("a", "b"))

    def test_arrays_are_immutable(self):
        m = DataMatrix(np.ones((2, 2)), np.zeros((2, 2), bool), ("a", "b"))
        with pytest.raises(ValueError):
            m.values[0, 0] = 5.0
        with pytest.raises(ValueError):
            m.mask[0, 0] = True

    def test_equals_is_exact(self):
        m = DataMatrix([[1.0, 2.0], [3.0, 4.0]], [[False, True], [False, False]], ("a", "b"))
        same = DataMatrix([[1.0, 9.9], [3.0, 4.0]], [[False, True], [False, False]], ("a", "b"))
        assert m.equals(same)  # masked entries do not participate
        other = DataMatrix([[1.0, 2.0], [3.0, 4.5]], [[False, True], [False, False]], ("a", "b"))
        assert not m.equals(other)


class TestColumnSplit:
    def test_partition(self):
        m = DataMatrix(
            [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            [[False, True], [False, False], [False, True]],
            ("a", "b"),
        )
        split = column_split(m, 1)
        assert split.rows_obs.tolist() == [1]
        assert split.rows_mis.tolist() == [0, 2]
        complete = column_split(m, 0)
        assert complete.rows_obs.tolist() == [0, 1, 2]
        assert complete.rows_mis.size == 0


class TestCsv:
    def test_load_basic(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,2\n3,NA\n")
        m = load_csv(path)
        assert m.shape == (2, 2)
        assert m.col_names == ("a", "b")
        assert m.mask.tolist() == [[False, False], [False, True]]
        assert m.values[0, 0] == 1.0

    def test_load_rejects_fully_missing_column(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,NA\n2,NA\n")
        with pytest.raises(CsvParseError, match="fully missing"):
            load_csv(path)

    def test_load_reports_bad_field(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a\n1\nx\n")
        with pytest.raises(CsvParseError, match=r"row 2.*'x'"):
            load_csv(path)

    def test_load_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,2\n3\n")
        with pytest.raises(CsvParseError, match="row 2"):
            load_csv(path)

    def test_load_rejects_inf(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a\n1\ninf\n")
        with pytest.raises(CsvParseError, match="non-finite"):
            load_csv(path)

    def test_custom_na_token(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,?\n2,3\n")
        m = load_csv(path, na_token="?")
        assert m.mask[0, 1]

    def test_write_uses_na_token(self, tmp_path):
        m = DataMatrix([[1.0, 2.0], [3.0, 4.0]], [[False, True], [False, False]], ("a", "b"))
        path = tmp_path / "out.csv"
        write_csv(m, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "a,b"
        assert lines[1].split(",")[1] == "NA"

    def test_write_complete_has_no_token(self, tmp_path):
        m = DataMatrix([[1.0, 2.0], [3.0, 4.0]], np.zeros((2, 2), bool), ("a", "b"))
        path = tmp_path / "out.csv"
        write_csv(m, path)
        assert "NA" not in path.read_text()

    def test_round_trip_bit_exact(self, tmp_path, rng):
        # includes awkward magnitudes; 17 significant digits must reproduce exactly
        for trial in range(25):
            m = random_matrix(rng, 5, 3, missing=0.2 if trial % 2 else 0.0)
            scale = 10.0 ** rng.integers(-12, 12)
            m = DataMatrix(np.where(m.mask, 0.0, m.values * scale), m.mask, m.col_names)
            path = tmp_path / f"m{trial}.csv"
            write_csv(m, path)
            again = load_csv(path)
            assert again.equals(m)


class TestInjectMissing:
    def complete(self, rng, n=4, p=5):
        return random_matrix(rng, n, p)

    def test_exact_count(self, rng):
        pair = inject_missing(self.complete(rng), 0.10, seed=1)
        # floor(0.1 * 20) entries
        assert pair.injected_positions.shape == (2, 2)
        assert pair.observed.n_missing == 2

    def test_count_matches_floor_formula(self, rng):
        # brute-force the expected count over a range of shapes and fractions
        for n, p, frac in [(4, 5, 0.1), (10, 10, 0.3), (7, 3, 0.25), (6, 6, 0.5)]:
            m = random_matrix(rng, n, p)
            expected = int(np.floor(frac * n * p + 1e-9))
            pair = inject_missing(m, frac, seed=3)
            assert pair.observed.n_missing == expected

    def test_deterministic(self, rng):
        m = self.complete(rng)
        a = inject_missing(m, 0.10, seed=7)
        b = inject_missing(m, 0.10, seed=7)
        assert np.array_equal(a.injected_positions, b.injected_positions)
        assert a.observed.equals(b.observed)
        c = inject_missing(m, 0.10, seed=8)
        assert not np.array_equal(a.injected_positions, c.injected_positions)

    def test_columns_keep_two_observed(self, rng):
        m = random_matrix(rng, 10, 10)
        pair = inject_missing(m, 0.30, seed=5)
        assert pair.observed.n_missing == 30
        assert ((~pair.observed.mask).sum(axis=0) >= 2).all()

    def test_truth_agrees_on_observed(self, rng):
        m = self.complete(rng)
        pair = inject_missing(m, 0.2, seed=2)
        keep = ~pair.observed.mask
        assert np.array_equal(pair.truth.values[keep], pair.observed.values[keep])

    def test_rejects_bad_fraction(self, rng):
        m = self.complete(rng)
        for frac in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(DataError):
                inject_missing(m, frac, seed=1)

    def test_rejects_tiny_fraction(self, rng):
        with pytest.raises(DataError, match="no entries"):
            inject_missing(self.complete(rng, 2, 2), 0.1, seed=1)

    def test_rejects_masked_input(self, rng):
        m = random_matrix(rng, 6, 3, missing=0.2)
        with pytest.raises(DataError, match="empty mask"):
            inject_missing(m, 0.1, seed=1)

    def test_impossible_injection_errors(self, rng):
        # 0.9 of a 3x2 matrix is 5 of 6 entries; some column always drops below 2 observed
        m = random_matrix(rng, 3, 2)
        with pytest.raises(DataError, match="fewer than 2"):
            inject_missing(m, 0.9, seed=1)
