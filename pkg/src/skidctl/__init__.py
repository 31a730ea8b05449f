"""Safe hierarchical wheel-velocity control sandbox for skid-steer robots."""

__version__ = "0.1.0"

from .network import Batch, Network, NormParams
from .plant import ActuationChain, DisturbanceProfile, PlantParams, PlantState
from .rac import AdaptiveState, PpcParams
from .scenario import RunSummary, ScenarioConfig, Trace
from .supervisor import SupervisorDecision, SupervisorState
from .train import DataSplit, LMConfig, TrainHistory

__all__ = [
    "ActuationChain",
    "AdaptiveState",
    "Batch",
    "DataSplit",
    "DisturbanceProfile",
    "LMConfig",
    "Network",
    "NormParams",
    "PlantParams",
    "PlantState",
    "PpcParams",
    "RunSummary",
    "ScenarioConfig",
    "SupervisorDecision",
    "SupervisorState",
    "Trace",
    "TrainHistory",
    "__version__",
]
