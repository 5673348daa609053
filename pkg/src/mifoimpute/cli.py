"""Command-line front end: generate / inject / impute / evaluate / benchmark / sweep."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import (
    BaselineParams,
    ConvergenceError,
    knn_impute,
    lls_impute,
    mean_impute,
    svd_impute,
    svt_impute,
)
from .bench import (
    BenchmarkGrid,
    SweepGrid,
    SyntheticSpec,
    generate_synthetic,
    render_report,
    run_benchmark,
    run_sweep,
)
from .data import DataError, inject_missing, load_csv, write_csv
from .forest import ForestParams
from .metrics import evaluate_imputation
from .mifo import MifoParams, mifo_impute

logger = logging.getLogger(__name__)

METHOD_CHOICES = ("mifo", "mean", "knn", "svd", "svt", "lls")

# flags each impute method understands; anything else set on the command line
# for a different method is a usage error, not silently ignored
_METHOD_FLAGS = {
    "mifo": {"ntree", "mtry", "min_node_size", "max_iter", "diagnostics"},
    "mean": set(),
    "knn": {"knn_k"},
    "svd": {"svd_rank", "svd_max_iter", "svd_tol"},
    "svt": {"svt_tau", "svt_step", "svt_max_iter", "svt_tol"},
    "lls": {"lls_k"},
}


class UsageError(Exception):
    """Bad command line; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=42, help="random seed (default 42)")
    sub.add_argument(
        "--na-token", default="NA", help="missing-value token in CSV files (default NA)"
    )
    sub.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads for forest fitting (default: available cores); "
        "results are identical for any value",
    )
    sub.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="-v for progress, -vv for debug output",
    )


def _add_forest_flags(sub: argparse.ArgumentParser, defaults: bool) -> None:
    d = ForestParams()
    m = MifoParams()
    sub.add_argument(
        "--ntree", type=int, default=d.ntree if defaults else None,
        help=f"trees per forest (default {d.ntree})",
    )
    sub.add_argument(
        "--mtry", type=int, default=None,
        help="candidate columns per node (default floor(sqrt(predictors)))",
    )
    sub.add_argument(
        "--min-node-size", type=int, default=d.min_node_size if defaults else None,
        help=f"stop splitting nodes at this size (default {d.min_node_size})",
    )
    sub.add_argument(
        "--max-iter", type=int, default=m.max_iter if defaults else None,
        help=f"sweep limit for the iterative forest (default {m.max_iter})",
    )


def _add_baseline_flags(sub: argparse.ArgumentParser, defaults: bool) -> None:
    d = BaselineParams()

    def dflt(v):
        return v if defaults else None

    sub.add_argument("--knn-k", type=int, default=dflt(d.knn_k),
                     help=f"neighbors for knn (default {d.knn_k})")
    sub.add_argument("--svd-rank", type=int, default=dflt(d.svd_rank),
                     help=f"rank for svd completion (default {d.svd_rank})")
    sub.add_argument("--svd-max-iter", type=int, default=dflt(d.svd_max_iter),
                     help=f"iteration cap for svd completion (default {d.svd_max_iter})")
    sub.add_argument("--svd-tol", type=float, default=dflt(d.svd_tol),
                     help=f"relative-change tolerance for svd (default {d.svd_tol})")
    sub.add_argument("--svt-tau", type=float, default=None,
                     help="shrinkage threshold for svt (default 5*sqrt(n*p))")
    sub.add_argument("--svt-step", type=float, default=None,
                     help="step size for svt (default 1.2*n*p/observed)")
    sub.add_argument("--svt-max-iter", type=int, default=dflt(d.svt_max_iter),
                     help=f"iteration cap for svt (default {d.svt_max_iter})")
    sub.add_argument("--svt-tol", type=float, default=dflt(d.svt_tol),
                     help=f"residual tolerance for svt (default {d.svt_tol})")
    sub.add_argument("--lls-k", type=int, default=dflt(d.lls_k),
                     help=f"neighbors for local least squares (default {d.lls_k})")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="mifoimpute",
        description="Missing-value imputation toolkit: iterative random-forest "
        "imputation, five baselines, and a reproducible benchmark harness. "
        "All row/column indices in files are 0-based.",
    )
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = subs.add_parser("generate", help="write a synthetic low-rank CSV dataset")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--rows", type=int, default=SyntheticSpec.n_rows)
    gen.add_argument("--cols", type=int, default=SyntheticSpec.n_cols)
    gen.add_argument("--rank", type=int, default=SyntheticSpec.latent_rank)
    gen.add_argument("--noise", type=float, default=SyntheticSpec.noise_sigma)
    _add_common(gen)

    inj = subs.add_parser("inject", help="mask a fraction of entries at random")
    inj.add_argument("--in", dest="input", required=True, help="complete input CSV")
    inj.add_argument("--out", required=True, help="masked output CSV")
    inj.add_argument(
        "--positions", required=True, help="output CSV of masked positions (row,col)"
    )
    inj.add_argument("--rate", type=float, required=True, help="fraction in (0,1)")
    _add_common(inj)

    imp = subs.add_parser("impute", help="fill missing entries of a CSV")
    imp.add_argument("--in", dest="input", required=True, help="input CSV with NAs")
    imp.add_argument("--out", required=True, help="completed output CSV")
    imp.add_argument("--method", required=True, choices=METHOD_CHOICES)
    imp.add_argument(
        "--diagnostics", default=None,
        help="JSON-lines diagnostics path for mifo (default <out>.diag.jsonl)",
    )
    _add_forest_flags(imp, defaults=False)
    _add_baseline_flags(imp, defaults=False)
    _add_common(imp)

    ev = subs.add_parser("evaluate", help="score an imputation against ground truth")
    ev.add_argument("--truth", required=True, help="complete ground-truth CSV")
    ev.add_argument("--imputed", required=True, help="completed CSV to score")
    ev.add_argument("--positions", required=True, help="positions CSV (row,col)")
    ev.add_argument(
        "--per-column-out", default=None, help="optional per-column NMAE CSV"
    )
    _add_common(ev)

    ben = subs.add_parser(
        "benchmark", help="method x missing-rate grid on a complete dataset"
    )
    ben.add_argument("--in", dest="input", default=None,
                     help="complete ground-truth CSV (default: synthetic data)")
    ben.add_argument("--outdir", required=True, help="directory for grid.csv/grid.md")
    ben.add_argument("--methods", default=",".join(METHOD_CHOICES),
                     help="comma-separated method list")
    ben.add_argument("--rates", default="0.1,0.2,0.3", help="comma-separated rates")
    ben.add_argument("--seeds", default=None,
                     help="comma-separated injection seeds (default: --seed)")
    ben.add_argument("--rows", type=int, default=100, help="synthetic rows")
    ben.add_argument("--cols", type=int, default=20, help="synthetic columns")
    ben.add_argument("--rank", type=int, default=3, help="synthetic latent rank")
    ben.add_argument("--noise", type=float, default=0.1, help="synthetic noise sigma")
    ben.add_argument("--timing-strict", action="store_true",
                     help="time impute calls single-threaded")
    _add_forest_flags(ben, defaults=True)
    _add_baseline_flags(ben, defaults=True)
    _add_common(ben)

    sw = subs.add_parser("sweep", help="ntree x mtry grid for the iterative forest")
    sw.add_argument("--in", dest="input", default=None,
                    help="complete ground-truth CSV (default: synthetic data)")
    sw.add_argument("--outdir", required=True, help="directory for sweep.csv/sweep.md")
    sw.add_argument("--ntree-values", default="10,50,100,250,500")
    sw.add_argument("--mtry-values", default="1,2,4,8,16")
    sw.add_argument("--rate", type=float, default=0.10, help="missing rate")
    sw.add_argument("--rows", type=int, default=100, help="synthetic rows")
    sw.add_argument("--cols", type=int, default=20, help="synthetic columns")
    sw.add_argument("--rank", type=int, default=3, help="synthetic latent rank")
    sw.add_argument("--noise", type=float, default=0.1, help="synthetic noise sigma")
    sw.add_argument("--min-node-size", type=int, default=ForestParams.min_node_size)
    sw.add_argument("--max-iter", type=int, default=MifoParams.max_iter)
    _add_common(sw)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _guard_overwrite(inputs: list[str | None], outputs: list[str | None]) -> None:
    resolved_in = {Path(p).resolve() for p in inputs if p}
    for out in outputs:
        if out and Path(out).resolve() in resolved_in:
            raise UsageError(f"refusing to overwrite input file '{out}'")


def _parse_list(text: str, cast, flag: str) -> tuple:
    try:
        items = tuple(cast(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"cannot parse {flag} value '{text}'") from None
    if not items:
        raise UsageError(f"{flag} must list at least one value")
    return items


def _cmd_generate(args) -> int:
    _guard_overwrite([], [args.out])
    spec = SyntheticSpec(
        n_rows=args.rows, n_cols=args.cols, latent_rank=args.rank,
        noise_sigma=args.noise, seed=args.seed,
    )
    write_csv(generate_synthetic(spec), args.out, args.na_token)
    logger.info("wrote %s", args.out)
    return 0


def _cmd_inject(args) -> int:
    _guard_overwrite([args.input], [args.out, args.positions])
    m = load_csv(args.input, args.na_token)
    pair = inject_missing(m, args.rate, args.seed)
    write_csv(pair.observed, args.out, args.na_token)
    with open(args.positions, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col"])
        writer.writerows(pair.injected_positions.tolist())
    logger.info("masked %d entries", pair.injected_positions.shape[0])
    return 0


def _check_method_flags(args) -> None:
    allowed = _METHOD_FLAGS[args.method]
    for flag in sorted(set().union(*_METHOD_FLAGS.values())):
        if getattr(args, flag) is not None and flag not in allowed:
            raise UsageError(
                f"--{flag.replace('_', '-')} does not apply to method '{args.method}'"
            )


def _mifo_params_from(args) -> MifoParams:
    forest = ForestParams(
        ntree=args.ntree if args.ntree is not None else ForestParams.ntree,
        mtry=args.mtry,
        min_node_size=(
            args.min_node_size
            if args.min_node_size is not None
            else ForestParams.min_node_size
        ),
        seed=args.seed,
    )
    max_iter = args.max_iter if args.max_iter is not None else MifoParams.max_iter
    return MifoParams(forest=forest, max_iter=max_iter)


def _baseline_params_from(args) -> BaselineParams:
    d = BaselineParams()

    def pick(name):
        v = getattr(args, name)
        return v if v is not None else getattr(d, name)

    return BaselineParams(
        knn_k=pick("knn_k"), svd_rank=pick("svd_rank"),
        svd_max_iter=pick("svd_max_iter"), svd_tol=pick("svd_tol"),
        svt_tau=args.svt_tau, svt_step=args.svt_step,
        svt_max_iter=pick("svt_max_iter"), svt_tol=pick("svt_tol"),
        lls_k=pick("lls_k"),
    )


def _cmd_impute(args) -> int:
    _check_method_flags(args)
    diagnostics = args.diagnostics
    if args.method == "mifo" and diagnostics is None:
        diagnostics = f"{args.out}.diag.jsonl"
    _guard_overwrite([args.input], [args.out, diagnostics])
    m = load_csv(args.input, args.na_token)
    if args.method == "mifo":
        result = mifo_impute(m, _mifo_params_from(args), n_threads=args.threads)
        write_csv(result.imputed, args.out, args.na_token)
        _write_diagnostics(diagnostics, result)
    else:
        params = _baseline_params_from(args)
        if args.method == "mean":
            imputed = mean_impute(m)
        elif args.method == "knn":
            imputed = knn_impute(m, params.knn_k)
        elif args.method == "svd":
            imputed = svd_impute(m, params)
        elif args.method == "svt":
            imputed = svt_impute(m, params)
        else:
            imputed = lls_impute(m, params)
        write_csv(imputed, args.out, args.na_token)
    logger.info("wrote %s", args.out)
    return 0


def _write_diagnostics(path: str, result) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, delta in enumerate(result.delta_trace, start=1):
            fh.write(json.dumps({"iteration": i, "delta": delta}) + "\n")
        per_col = [
            None if not np.isfinite(v) else v for v in result.per_column_oob_mse
        ]
        fh.write(
            json.dumps(
                {
                    "iterations_run": result.iterations_run,
                    "converged": result.converged,
                    "oob_nrmse_estimate": _json_float(result.oob_nrmse_estimate),
                    "oob_nmae_estimate": _json_float(result.oob_nmae_estimate),
                    "per_column_oob_mse": per_col,
                }
            )
            + "\n"
        )


def _json_float(v: float):
    return None if not np.isfinite(v) else v


def _read_positions(path: str) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["row", "col"]:
            raise DataError(f"{path}: expected header 'row,col'")
        try:
            rows = [(int(r), int(c)) for r, c in reader]
        except ValueError as exc:
            raise DataError(f"{path}: bad position record ({exc})") from None
    if not rows:
        raise DataError(f"{path}: no positions listed")
    return np.asarray(rows, dtype=np.int64)


def _cmd_evaluate(args) -> int:
    _guard_overwrite(
        [args.truth, args.imputed, args.positions], [args.per_column_out]
    )
    truth = load_csv(args.truth, args.na_token)
    imputed = load_csv(args.imputed, args.na_token)
    positions = _read_positions(args.positions)
    report = evaluate_imputation(truth, imputed, positions)
    print(f"nrmse={report.nrmse:.17g} nmae={report.nmae_overall:.17g}")
    if args.per_column_out:
        with open(args.per_column_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["column", "nmae"])
            for name, value in zip(truth.col_names, report.nmae_per_col):
                writer.writerow(
                    [name, args.na_token if not np.isfinite(value) else f"{value:.17g}"]
                )
    return 0


def _load_or_generate(args):
    if args.input:
        return load_csv(args.input, args.na_token)
    spec = SyntheticSpec(
        n_rows=args.rows, n_cols=args.cols, latent_rank=args.rank,
        noise_sigma=args.noise, seed=args.seed,
    )
    return generate_synthetic(spec)


def _cmd_benchmark(args) -> int:
    outdir = Path(args.outdir)
    _guard_overwrite([args.input], [str(outdir / "grid.csv"), str(outdir / "grid.md")])
    data = _load_or_generate(args)
    methods = _parse_list(args.methods, str, "--methods")
    rates = _parse_list(args.rates, float, "--rates")
    seeds = (
        _parse_list(args.seeds, int, "--seeds") if args.seeds else (args.seed,)
    )
    grid = BenchmarkGrid(methods=methods, rates=rates, seeds=seeds)
    result = run_benchmark(
        data, grid,
        mifo_params=_mifo_params_from(args),
        baseline_params=_baseline_params_from(args),
        n_threads=args.threads,
        timing_strict=args.timing_strict,
    )
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "grid.csv").write_text(render_report(result, "csv"), encoding="utf-8")
    (outdir / "grid.md").write_text(render_report(result, "markdown"), encoding="utf-8")
    logger.info("wrote %s and %s", outdir / "grid.csv", outdir / "grid.md")
    return 0


def _cmd_sweep(args) -> int:
    outdir = Path(args.outdir)
    _guard_overwrite([args.input], [str(outdir / "sweep.csv"), str(outdir / "sweep.md")])
    data = _load_or_generate(args)
    grid = SweepGrid(
        ntree_values=_parse_list(args.ntree_values, int, "--ntree-values"),
        mtry_values=_parse_list(args.mtry_values, int, "--mtry-values"),
        rate=args.rate,
        seed=args.seed,
    )
    params = MifoParams(
        forest=ForestParams(min_node_size=args.min_node_size, seed=args.seed),
        max_iter=args.max_iter,
    )
    result = run_sweep(data, grid, mifo_params=params, n_threads=args.threads)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "sweep.csv").write_text(render_report(result, "csv"), encoding="utf-8")
    (outdir / "sweep.md").write_text(render_report(result, "markdown"), encoding="utf-8")
    logger.info("wrote %s and %s", outdir / "sweep.csv", outdir / "sweep.md")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "inject": _cmd_inject,
    "impute": _cmd_impute,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    """Entry point. Returns 0 on success, 1 on usage errors, 2 on data or
    compute errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    _configure_logging(args.verbose)
    if args.threads < 1:
        print("usage error: --threads must be at least 1", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ConvergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
