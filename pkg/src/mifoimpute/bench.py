"""Benchmark harness: synthetic data generation, method x missing-rate grids,
forest-size sweeps, and CSV/markdown reports."""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .baselines import (
    BaselineParams,
    knn_impute,
    lls_impute,
    mean_impute,
    svd_impute,
    svt_impute,
)
from .data import DataError, DataMatrix, inject_missing, seed_sequence
from .metrics import nmae, nrmse
from .mifo import MifoParams, mifo_impute

logger = logging.getLogger(__name__)

METHOD_NAMES = ("mifo", "mean", "knn", "svd", "svt", "lls")


@dataclass(frozen=True)
class SyntheticSpec:
    """Low-rank-plus-noise generator: A @ B.T + noise, all standard normal."""

    n_rows: int = 100
    n_cols: int = 254
    latent_rank: int = 3
    noise_sigma: float = 0.1
    seed: int = 42


def generate_synthetic(spec: SyntheticSpec) -> DataMatrix:
    """Deterministic complete matrix with correlated columns of the given rank."""
    if spec.n_rows < 2 or spec.n_cols < 1:
        raise DataError("need at least 2 rows and 1 column")
    if not 1 <= spec.latent_rank <= min(spec.n_rows, spec.n_cols):
        raise DataError(
            f"latent_rank {spec.latent_rank} must be between 1 and "
            f"{min(spec.n_rows, spec.n_cols)}"
        )
    if spec.noise_sigma < 0:
        raise DataError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(seed_sequence(spec.seed))
    a = rng.standard_normal((spec.n_rows, spec.latent_rank))
    b = rng.standard_normal((spec.n_cols, spec.latent_rank))
    x = a @ b.T + spec.noise_sigma * rng.standard_normal((spec.n_rows, spec.n_cols))
    names = tuple(f"x{j}" for j in range(spec.n_cols))
    return DataMatrix(x, np.zeros(x.shape, dtype=bool), names)


@dataclass(frozen=True)
class BenchmarkCell:
    method: str
    rate: float
    seed: int
    nrmse: float
    nmae: float
    wall_seconds: float
    converged: bool
    error: str | None
    observed_sha256: str


@dataclass(frozen=True)
class BenchmarkGrid:
    """Method x missing-rate x seed grid; ``cells`` is empty until run."""

    methods: tuple[str, ...]
    rates: tuple[float, ...] = (0.10, 0.20, 0.30)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    cells: tuple[BenchmarkCell, ...] = ()

    def cell(self, method: str, rate: float, seed: int) -> BenchmarkCell:
        for c in self.cells:
            if c.method == method and c.rate == rate and c.seed == seed:
                return c
        raise KeyError((method, rate, seed))


@dataclass(frozen=True)
class SweepCell:
    ntree: int
    mtry: int
    mtry_effective: int
    clamped: bool
    nrmse_pct: float
    nmae_pct: float
    wall_seconds: float


@dataclass(frozen=True)
class SweepGrid:
    """ntree x mtry grid of iterative-forest runs at one fixed missing rate."""

    ntree_values: tuple[int, ...] = (10, 50, 100, 250, 500)
    mtry_values: tuple[int, ...] = (1, 2, 4, 8, 16)
    rate: float = 0.10
    seed: int = 42
    cells: tuple[SweepCell, ...] = ()

    def cell(self, ntree: int, mtry: int) -> SweepCell:
        for c in self.cells:
            if c.ntree == ntree and c.mtry == mtry:
                return c
        raise KeyError((ntree, mtry))


def matrix_digest(m: DataMatrix) -> str:
    """Fingerprint of values, mask and names; equal digests mean equal matrices."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(m.values).tobytes())
    h.update(np.ascontiguousarray(m.mask).tobytes())
    h.update("\x00".join(m.col_names).encode())
    return h.hexdigest()


def _imputer(
    method: str,
    mifo_params: MifoParams,
    baseline_params: BaselineParams,
    n_threads: int,
):
    if method == "mifo":
        def run(observed: DataMatrix) -> tuple[DataMatrix, bool]:
            result = mifo_impute(observed, mifo_params, n_threads=n_threads)
            return result.imputed, result.converged
        return run
    simple = {
        "mean": lambda obs: mean_impute(obs),
        "knn": lambda obs: knn_impute(obs, baseline_params.knn_k),
        "svd": lambda obs: svd_impute(obs, baseline_params),
        "svt": lambda obs: svt_impute(obs, baseline_params),
        "lls": lambda obs: lls_impute(obs, baseline_params),
    }
    if method not in simple:
        raise DataError(
            f"unknown method '{method}' (known: {', '.join(METHOD_NAMES)})"
        )
    fn = simple[method]
    return lambda observed: (fn(observed), True)


def run_benchmark(
    data: DataMatrix,
    grid: BenchmarkGrid,
    mifo_params: MifoParams = MifoParams(),
    baseline_params: BaselineParams = BaselineParams(),
    n_threads: int = 1,
    timing_strict: bool = False,
) -> BenchmarkGrid:
    """Fill the grid: per (rate, seed) inject once, then run every method on
    the same observed matrix and score it against the truth.

    A method failure is recorded in its cell without aborting the grid. Wall
    time covers the impute call only. With ``timing_strict`` the timed call
    runs single-threaded so measurements are not skewed by thread scheduling.
    """
    if not data.is_complete:
        raise DataError("benchmark data must be a complete ground-truth matrix")
    if not grid.methods or not grid.rates or not grid.seeds:
        raise DataError("benchmark grid needs methods, rates and seeds")
    impute_threads = 1 if timing_strict else n_threads
    cells: list[BenchmarkCell] = []
    for rate in grid.rates:
        for seed in grid.seeds:
            pair = inject_missing(data, rate, seed)
            digest = matrix_digest(pair.observed)
            positions = pair.injected_positions
            for method in grid.methods:
                cells.append(
                    _run_cell(
                        method, rate, seed, pair.truth, pair.observed, positions,
                        digest, mifo_params, baseline_params, impute_threads,
                    )
                )
    return replace(grid, cells=tuple(cells))


def _run_cell(
    method, rate, seed, truth, observed, positions, digest,
    mifo_params, baseline_params, n_threads,
) -> BenchmarkCell:
    try:
        run = _imputer(method, mifo_params, baseline_params, n_threads)
        start = time.perf_counter()
        imputed, converged = run(observed)
        elapsed = time.perf_counter() - start
        score_nrmse = nrmse(truth, imputed, positions)
        _, score_nmae = nmae(truth, imputed, positions)
        return BenchmarkCell(
            method=method, rate=rate, seed=seed,
            nrmse=score_nrmse, nmae=score_nmae, wall_seconds=elapsed,
            converged=converged, error=None, observed_sha256=digest,
        )
    except Exception as exc:  # error isolation: one bad cell never kills the grid
        logger.warning("benchmark cell (%s, %g, %d) failed: %s", method, rate, seed, exc)
        return BenchmarkCell(
            method=method, rate=rate, seed=seed,
            nrmse=float("nan"), nmae=float("nan"), wall_seconds=float("nan"),
            converged=False, error=str(exc), observed_sha256=digest,
        )


def run_sweep(
    data: DataMatrix,
    grid: SweepGrid,
    mifo_params: MifoParams = MifoParams(),
    n_threads: int = 1,
) -> SweepGrid:
    """Run the iterative forest over the full ntree x mtry grid.

    Missingness is injected once at ``grid.rate`` with ``grid.seed`` and the
    same observed matrix is reused for every cell. An mtry above the available
    predictor count is clamped to it and flagged.
    """
    if not data.is_complete:
        raise DataError("sweep data must be a complete ground-truth matrix")
    if not grid.ntree_values or not grid.mtry_values:
        raise DataError("sweep grid needs ntree and mtry values")
    pair = inject_missing(data, grid.rate, grid.seed)
    positions = pair.injected_positions
    max_mtry = data.n_cols - 1
    cells: list[SweepCell] = []
    for ntree in grid.ntree_values:
        for mtry in grid.mtry_values:
            effective = min(mtry, max_mtry)
            clamped = effective != mtry
            if clamped:
                logger.warning(
                    "sweep: mtry %d clamped to %d available predictors", mtry, effective
                )
            params = replace(
                mifo_params,
                forest=replace(mifo_params.forest, ntree=ntree, mtry=effective),
            )
            start = time.perf_counter()
            result = mifo_impute(pair.observed, params, n_threads=n_threads)
            elapsed = time.perf_counter() - start
            score_nrmse = nrmse(pair.truth, result.imputed, positions)
            _, score_nmae = nmae(pair.truth, result.imputed, positions)
            cells.append(
                SweepCell(
                    ntree=ntree, mtry=mtry, mtry_effective=effective,
                    clamped=clamped, nrmse_pct=100.0 * score_nrmse,
                    nmae_pct=100.0 * score_nmae, wall_seconds=elapsed,
                )
            )
    return replace(grid, cells=tuple(cells))


def _fmt(x: float, digits: int = 17) -> str:
    return format(x, f".{digits}g")


def _benchmark_csv(grid: BenchmarkGrid) -> str:
    lines = ["method,rate,seed,nrmse,nmae,seconds,converged"]
    for c in grid.cells:
        if c.error is not None:
            fields = [c.method, _fmt(c.rate), str(c.seed), "", "", "", "false"]
        else:
            fields = [
                c.method, _fmt(c.rate), str(c.seed), _fmt(c.nrmse), _fmt(c.nmae),
                _fmt(c.wall_seconds), "true" if c.converged else "false",
            ]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def _pivot_markdown(grid: BenchmarkGrid, metric: str) -> list[str]:
    title = {"nrmse": "Seed-median NRMSE", "nmae": "Seed-median NMAE"}[metric]
    header = "| method | " + " | ".join(f"{100 * r:g}%" for r in grid.rates) + " |"
    rule = "|---" * (len(grid.rates) + 1) + "|"
    lines = [f"## {title}", "", header, rule]
    for method in grid.methods:
        row = [method]
        for rate in grid.rates:
            vals = [
                getattr(c, metric)
                for c in grid.cells
                if c.method == method and c.rate == rate and c.error is None
            ]
            row.append(_fmt(float(np.median(vals)), 6) if vals else "error")
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return lines


def _benchmark_markdown(grid: BenchmarkGrid) -> str:
    lines = ["# Imputation benchmark", ""]
    lines += _pivot_markdown(grid, "nrmse")
    lines += _pivot_markdown(grid, "nmae")
    return "\n".join(lines) + "\n"


def _sweep_csv(grid: SweepGrid) -> str:
    lines = ["ntree,mtry,nrmse_pct,nmae_pct,seconds,clamped"]
    for c in grid.cells:
        lines.append(
            ",".join(
                [
                    str(c.ntree), str(c.mtry), _fmt(c.nrmse_pct), _fmt(c.nmae_pct),
                    _fmt(c.wall_seconds), "true" if c.clamped else "false",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _sweep_markdown(grid: SweepGrid) -> str:
    header = "| mtry | " + " | ".join(str(t) for t in grid.ntree_values) + " |"
    rule = "|---" * (len(grid.ntree_values) + 1) + "|"
    lines = [
        "# Forest-size sweep",
        "",
        f"Error (NRMSE%/NMAE%) and runtime per cell at {100 * grid.rate:g}% missing.",
        "",
        header,
        rule,
    ]
    for mtry in grid.mtry_values:
        row = [str(mtry)]
        for ntree in grid.ntree_values:
            c = grid.cell(ntree, mtry)
            row.append(f"{c.nrmse_pct:.2f}/{c.nmae_pct:.2f} {c.wall_seconds:.2f}s")
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines) + "\n"


def render_report(grid: BenchmarkGrid | SweepGrid, format: str = "csv") -> str:
    """Render a completed grid as ``csv`` (one row per cell) or ``markdown``
    (pivot tables of seed medians, or the error/runtime sweep table)."""
    if format not in ("csv", "markdown"):
        raise DataError(f"unknown report format '{format}'")
    if isinstance(grid, BenchmarkGrid):
        return _benchmark_csv(grid) if format == "csv" else _benchmark_markdown(grid)
    if isinstance(grid, SweepGrid):
        return _sweep_csv(grid) if format == "csv" else _sweep_markdown(grid)
    raise DataError(f"cannot render {type(grid).__name__}")
