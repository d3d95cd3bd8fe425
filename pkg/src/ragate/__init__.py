"""Safe Bayesian gating between edge and cloud retrieval-augmented generation."""

from .config import ConfigError, ScenarioConfig, load_and_validate
from .costs import ArmCostProfile, CostWeights, Outcome, TokenDist, resource_cost, time_cost, total_cost
from .gate import Action, Context, Generation, QoSSpec, Retrieval, SafeGate
from .gp import GaussianProcess, KernelParams
from .runner import RunSummary, StepRecord, compare, run

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ArmCostProfile",
    "ConfigError",
    "Context",
    "CostWeights",
    "GaussianProcess",
    "Generation",
    "KernelParams",
    "Outcome",
    "QoSSpec",
    "Retrieval",
    "RunSummary",
    "SafeGate",
    "ScenarioConfig",
    "StepRecord",
    "TokenDist",
    "compare",
    "load_and_validate",
    "resource_cost",
    "run",
    "time_cost",
    "total_cost",
]
