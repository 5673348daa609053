"""Missing-value imputation toolkit: iterative random-forest imputation,
five baseline imputers, and a reproducible benchmark harness."""

from .baselines import (
    BaselineParams,
    ConvergenceError,
    SvdFactors,
    knn_impute,
    lls_impute,
    mean_impute,
    svd_decompose,
    svd_impute,
    svd_shrink,
    svt_impute,
)
from .bench import (
    BenchmarkCell,
    BenchmarkGrid,
    SweepCell,
    SweepGrid,
    SyntheticSpec,
    generate_synthetic,
    matrix_digest,
    render_report,
    run_benchmark,
    run_sweep,
)
from .data import (
    ColumnSplit,
    CsvParseError,
    DataError,
    DataMatrix,
    GroundTruthPair,
    column_split,
    inject_missing,
    load_csv,
    write_csv,
)
from .forest import (
    ForestParams,
    RegressionForest,
    RegressionTree,
    fit_forest,
    oob_error,
    oob_predictions,
    predict_forest,
)
from .metrics import EvaluationReport, evaluate_imputation, nmae, nrmse
from .mifo import (
    ImputationResult,
    MifoParams,
    delta_n,
    initial_guess,
    mifo_impute,
    sort_columns_by_missingness,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineParams",
    "BenchmarkCell",
    "BenchmarkGrid",
    "ColumnSplit",
    "ConvergenceError",
    "CsvParseError",
    "DataError",
    "DataMatrix",
    "EvaluationReport",
    "ForestParams",
    "GroundTruthPair",
    "ImputationResult",
    "MifoParams",
    "RegressionForest",
    "RegressionTree",
    "SvdFactors",
    "SweepCell",
    "SweepGrid",
    "SyntheticSpec",
    "column_split",
    "delta_n",
    "evaluate_imputation",
    "fit_forest",
    "generate_synthetic",
    "initial_guess",
    "inject_missing",
    "knn_impute",
    "lls_impute",
    "load_csv",
    "matrix_digest",
    "mean_impute",
    "mifo_impute",
    "nmae",
    "nrmse",
    "oob_error",
    "oob_predictions",
    "predict_forest",
    "render_report",
    "run_benchmark",
    "run_sweep",
    "sort_columns_by_missingness",
    "svd_decompose",
    "svd_impute",
    "svd_shrink",
    "svt_impute",
    "write_csv",
]
