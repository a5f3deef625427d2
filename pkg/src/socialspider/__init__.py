"""Social spider algorithm with a parameter-sensitivity experiment harness."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConfigurationError,
    NumericFailure,
    RunRecord,
    SsaParams,
    SsaState,
    optimize,
    step,
)
from .benchmarks import BenchmarkProblem, make_problem, make_suite  # noqa: E402
from .harness import ParameterGrid, execute_sweep, expand_grid, summarize  # noqa: E402

__all__ = [
    "BenchmarkProblem",
    "ConfigurationError",
    "NumericFailure",
    "ParameterGrid",
    "RunRecord",
    "SsaParams",
    "SsaState",
    "execute_sweep",
    "expand_grid",
    "make_problem",
    "make_suite",
    "optimize",
    "step",
    "summarize",
]
