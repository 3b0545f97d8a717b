"""nashbench: learning Nash equilibria of black-box games from noisy utility queries.

The library discretizes each agent's strategy set, fits one Gaussian-process
surrogate per agent utility, and maintains confidence bounds on the
equilibrium loss (the summed best-response gains).  The main solver keeps a
shrinking region of interest of candidates that may still be equilibria and
queries where the loss confidence interval is widest; several baseline
selection rules and a benchmark harness with traces and plots are included.
"""

from .space import ConfigurationError, JointSpace
from .games import (
    BudgetGame,
    GameOracle,
    GameSpec,
    HotellingGame,
    RpsGame,
    SaddleGame,
    TableGame,
    make_oracle,
)
from .kernels import KernelParams
from .gp import ModelFactorizationError, SurrogateModel, fit_hyperparams
from .bounds import BoundsTable, EnvelopeState
from .solver import (
    AlgorithmSpec,
    RunConfig,
    RunResult,
    run,
    theoretical_beta,
    verify_round_certificates,
)
from .config import ExperimentConfig, load_config
from .harness import TraceSet, load_traces, run_experiment, summarize, write_traces

__version__ = "0.1.0"

__all__ = [
    "AlgorithmSpec",
    "BoundsTable",
    "BudgetGame",
    "ConfigurationError",
    "EnvelopeState",
    "ExperimentConfig",
    "GameOracle",
    "GameSpec",
    "HotellingGame",
    "JointSpace",
    "KernelParams",
    "ModelFactorizationError",
    "RpsGame",
    "RunConfig",
    "RunResult",
    "SaddleGame",
    "SurrogateModel",
    "TableGame",
    "TraceSet",
    "fit_hyperparams",
    "load_config",
    "load_traces",
    "make_oracle",
    "run",
    "run_experiment",
    "summarize",
    "theoretical_beta",
    "verify_round_certificates",
    "write_traces",
    "__version__",
]
