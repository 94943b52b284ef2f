from .graph_service import GraphService
from .refinement_service import RefinementService
from .cleanup_service import CleanupService
from .aux_service import AuxService
from .game_service import GameService
from .generator_service import GeneratorService
from .io_service import IOService
from .experiment_service import ExperimentService, ExperimentStore

__all__ = [
    "GraphService",
    "RefinementService",
    "CleanupService",
    "AuxService",
    "GameService",
    "GeneratorService",
    "IOService",
    "ExperimentService",
    "ExperimentStore",
]
