"""Matrix-with-mask data model, CSV I/O and random mask injection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_UINT64_MASK = (1 << 64) - 1


class DataError(ValueError):
    """Invalid data, parameters or file contents."""


class CsvParseError(DataError):
    """CSV ingestion failure; the message carries file/row/column context."""


def seed_sequence(*parts: int) -> np.random.SeedSequence:
    """Deterministic SeedSequence from integer parts (negatives wrapped to uint64)."""
    return np.random.SeedSequence([int(p) & _UINT64_MASK for p in parts])


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n x p numeric matrix with an explicit missingness mask.

    ``mask[i, j]`` is True where entry (i, j) is missing. Masked entries hold
    NaN and must never be read as data; only an imputer writes them. Instances
    are immutable (arrays are frozen), so they are safe to share across threads.
    """

    values: np.ndarray
    mask: np.ndarray
    col_names: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)
        names = tuple(str(c) for c in self.col_names)
        if values.ndim != 2:
            raise DataError("values must be a 2-dimensional array")
        n, p = values.shape
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if p < 1:
            raise DataError("need at least 1 column")
        if mask.shape != values.shape:
            raise DataError(f"mask shape {mask.shape} does not match values shape {values.shape}")
        if len(names) != p:
            raise DataError(f"got {len(names)} column names for {p} columns")
        if any(not c for c in names) or len(set(names)) != p:
            raise DataError("column names must be unique and nonempty")
        dead = np.flatnonzero(mask.all(axis=0))
        if dead.size:
            raise DataError(f"column '{names[dead[0]]}' is fully missing")
        if not np.isfinite(values[~mask]).all():
            raise DataError("observed entries must be finite")
        values = np.where(mask, np.nan, values)
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "col_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_missing(self) -> int:
        return int(self.mask.sum())

    @property
    def is_complete(self) -> bool:
        return not self.mask.any()

    def missing_per_col(self) -> np.ndarray:
        return self.mask.sum(axis=0)

    def observed_column(self, col: int) -> np.ndarray:
        """Observed values of one column, in row order."""
        return self.values[~self.mask[:, col], col]

    def with_values(self, values: np.ndarray) -> "DataMatrix":
        """A complete copy of this matrix carrying ``values`` and an empty mask."""
        return DataMatrix(values, np.zeros(self.shape, dtype=bool), self.col_names)

    def equals(self, other: "DataMatrix") -> bool:
        """Exact equality: same names, same mask, bit-identical observed values."""
        return (
            self.col_names == other.col_names
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True, eq=False)
class ColumnSplit:
    """Row partition of one target column into observed and missing index sets."""

    target_col: int
    rows_obs: np.ndarray
    rows_mis: np.ndarray

    def __post_init__(self) -> None:
        obs = np.asarray(self.rows_obs, dtype=np.int64)
        mis = np.asarray(self.rows_mis, dtype=np.int64)
        n = obs.size + mis.size
        if obs.size == 0:
            raise DataError(f"column {self.target_col} has no observed rows")
        if not np.array_equal(np.union1d(obs, mis), np.arange(n)):
            raise DataError("rows_obs and rows_mis must partition the row range")
        obs = np.sort(obs)
        mis = np.sort(mis)
        obs.flags.writeable = False
        mis.flags.writeable = False
        object.__setattr__(self, "rows_obs", obs)
        object.__setattr__(self, "rows_mis", mis)


def column_split(m: DataMatrix, col: int) -> ColumnSplit:
    """Split the rows of column ``col`` into observed and missing index sets."""
    if not 0 <= col < m.n_cols:
        raise DataError(f"column index {col} out of range")
    missing = m.mask[:, col]
    return ColumnSplit(
        target_col=col,
        rows_obs=np.flatnonzero(~missing),
        rows_mis=np.flatnonzero(missing),
    )


@dataclass(frozen=True, eq=False)
class GroundTruthPair:
    """A complete matrix together with a masked copy and the injected positions."""

    truth: DataMatrix
    observed: DataMatrix
    injected_positions: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.injected_positions, dtype=np.int64).reshape(-1, 2)
        if not self.truth.is_complete:
            raise DataError("truth matrix must be complete")
        if self.truth.shape != self.observed.shape:
            raise DataError("truth and observed shapes differ")
        keep = ~self.observed.mask
        if not np.array_equal(self.truth.values[keep], self.observed.values[keep]):
            raise DataError("truth and observed disagree at an observed position")
        if not np.array_equal(np.argwhere(self.observed.mask), pos):
            raise DataError("injected_positions do not match the observed mask")
        pos.flags.writeable = False
        object.__setattr__(self, "injected_positions", pos)


def load_csv(path: str | Path, na_token: str = "NA") -> DataMatrix:
    """Read a UTF-8, comma-separated file with a header row into a DataMatrix.

    Every field must parse as a finite real number or equal ``na_token``
    exactly. Ragged rows, unparseable fields, duplicate column names and fully
    missing columns are rejected with the offending location in the message.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty") from None
        p = len(names)
        rows: list[np.ndarray] = []
        mask_rows: list[np.ndarray] = []
        for ridx, record in enumerate(reader, start=1):
            if len(record) != p:
                raise CsvParseError(
                    f"{path}: row {ridx} has {len(record)} fields, expected {p}"
                )
            vals = np.empty(p, dtype=np.float64)
            miss = np.zeros(p, dtype=bool)
            for cidx, field in enumerate(record):
                if field == na_token:
                    vals[cidx] = np.nan
                    miss[cidx] = True
                    continue
                try:
                    v = float(field)
                except ValueError:
                    raise CsvParseError(
                        f"{path}: row {ridx}, column '{names[cidx]}': "
                        f"cannot parse field {field!r}"
                    ) from None
                if not math.isfinite(v):
                    raise CsvParseError(
                        f"{path}: row {ridx}, column '{names[cidx]}': "
                        f"non-finite value {field!r}"
                    )
                vals[cidx] = v
            rows.append(vals)
            mask_rows.append(miss)
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    try:
        return DataMatrix(np.array(rows), np.array(mask_rows), tuple(names))
    except DataError as exc:
        raise CsvParseError(f"{path}: {exc}") from None


def write_csv(m: DataMatrix, path: str | Path, na_token: str = "NA") -> None:
    """Write a DataMatrix as CSV; masked entries become ``na_token``.

    Values are printed with 17 significant digits so that a load of the
    written file reproduces the matrix bit-identically.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(m.col_names)
        for i in range(m.n_rows):
            writer.writerow(
                [
                    na_token if m.mask[i, j] else format(m.values[i, j], ".17g")
                    for j in range(m.n_cols)
                ]
            )


def inject_missing(
    m: DataMatrix, fraction: float, seed: int, max_attempts: int = 100
) -> GroundTruthPair:
    """Mask exactly ``floor(fraction * n * p)`` entries uniformly at random.

    Positions are sampled without replacement; the draw is a deterministic
    function of (m, fraction, seed). Draws that would leave any column with
    fewer than 2 observed entries are resampled, up to ``max_attempts`` times.
    """
    if not m.is_complete:
        raise DataError("injection requires a matrix with an empty mask")
    if not 0.0 < fraction < 1.0:
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    n, p = m.shape
    # epsilon guards against 0.3 * 30 -> 8.999... landing one below the intended count
    count = int(math.floor(fraction * n * p + 1e-9))
    if count < 1:
        raise DataError(f"fraction {fraction} selects no entries on a {n}x{p} matrix")
    rng = np.random.default_rng(seed_sequence(seed))
    for _ in range(max_attempts):
        flat = rng.choice(n * p, size=count, replace=False)
        mask = np.zeros(n * p, dtype=bool)
        mask[flat] = True
        mask = mask.reshape(n, p)
        if ((~mask).sum(axis=0) >= 2).all():
            break
    else:
        raise DataError(
            f"injection at fraction {fraction} left a column with fewer than 2 "
            f"observed entries in each of {max_attempts} attempts"
        )
    observed = DataMatrix(m.values, mask, m.col_names)
    return GroundTruthPair(
        truth=m, observed=observed, injected_positions=np.argwhere(mask)
    )
