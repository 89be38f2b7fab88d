"""Preconditioned nonlinear conjugate gradient training, baselines, and a benchmark harness."""

from .batching import BatchPlan, averaged_gradient, next_batch
from .errors import (
    ConfigError,
    DatasetFormatError,
    DimensionMismatchError,
    NumericError,
    UnsupportedOperationError,
)
from .harness import RunConfig, RunResult, load_config, parse_config_text, read_run_csv, run, sweep
from .linesearch import LineSearchConfig, LineSearchState, effective_lr, observe
from .numerics import axpy, dot, hadamard, norm, reciprocal_clamped
from .optimizers import (
    FirstOrderState,
    NlcgState,
    OptimizerKind,
    StepMetrics,
    momentum_step,
    nlcg_exact_quadratic_step_length,
    nlcg_init,
    nlcg_step,
    rmsprop_step,
    sgd_step,
)
from .preconditioner import PreconditionerState, identity_inverse, update_and_invert
from .problems import (
    BatchEval,
    Dataset,
    LogisticRegressionProblem,
    MlpProblem,
    Problem,
    QuadraticProblem,
    accuracy,
    evaluate,
    load_csv_dataset,
    make_quadratic,
    make_synthetic_classification,
)
from .schedule import ScheduleConfig, default_regime, default_schedule_for, lr_at

__version__ = "0.1.0"
