from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

from app.models.graph import ColoredGraph
from app.models.schemas import HistoryTracker, PotentialCheck, RefinementVariant, ThresholdConfig


class MoveKind(str, Enum):
    P1_SPLIT = "p1-split"
    P1_WL_STEP = "p1-wl-step"
    P2_STABILIZE = "p2-stabilize"
    P2_ALGORITHM1 = "p2-algorithm1"
    CLEANUP = "cleanup"


class P1Strategy(str, Enum):
    WL_STEP = "wl-step"
    RANDOM_SPLIT = "random-split"


class P2Strategy(str, Enum):
    STABILIZE = "stabilize"
    ALGORITHM1 = "algorithm1"


class Move(BaseModel):
    player: int = Field(..., ge=1, le=2)
    kind: MoveKind
    cost: int = Field(..., ge=0)
    class_counts: Tuple[int, int]
    graph_hash: str
    resulting_graph: ColoredGraph = Field(exclude=True)

    @property
    def official(self) -> bool:
        return self.kind is not MoveKind.CLEANUP


class GameState(BaseModel):
    current: ColoredGraph
    history: List[ColoredGraph] = Field(default_factory=list, exclude=True)
    moves: List[Move] = Field(default_factory=list)
    total_cost: int = 0
    next_player: int = 1
    vertex_split_count: int = 0
    tracker: HistoryTracker = Field(default_factory=HistoryTracker)
    threshold: ThresholdConfig = Field(default_factory=ThresholdConfig)
    variant: RefinementVariant = RefinementVariant.COUNTING

    @property
    def is_over(self) -> bool:
        return self.current.is_discrete()


class Algorithm1Trace(BaseModel):
    move_index: int
    loop_iterations: int
    cleanup_steps: int
    aux_stable: bool
    aux_sizes: List[int] = Field(default_factory=list)


class Algorithm1Outcome(BaseModel):
    graph: ColoredGraph
    tracker: HistoryTracker
    trace: Algorithm1Trace
    cleanup_steps: int
    intermediates: List[ColoredGraph] = Field(default_factory=list, exclude=True)


class P2Outcome(BaseModel):
    graph: ColoredGraph
    kind: MoveKind
    cleanup_steps: int = 0
    intermediates: List[ColoredGraph] = Field(default_factory=list, exclude=True)
    trace: Optional[Algorithm1Trace] = None


class AuxGrowthCheck(BaseModel):
    """Aux graph before a small-region move vs. after its clean-up"""
    move_index: int
    contained: bool
    strict: bool
    size_before: int
    size_after: int
    edges_before: int
    edges_after: int


class GameTranscript(BaseModel):
    n: int
    p1: P1Strategy
    p2: P2Strategy
    seed: int
    moves: List[Move]
    total_cost: int
    wl_cost: int
    iterations_equivalent: int
    vertex_split_count: int
    potential_checks: List[PotentialCheck] = Field(default_factory=list)
    growth_checks: List[AuxGrowthCheck] = Field(default_factory=list)
    aux_sequence_length: int = 0
    aux_sequence_bound: float = 0.0
    algorithm1_traces: List[Algorithm1Trace] = Field(default_factory=list)
    final_graph: ColoredGraph = Field(exclude=True)

    def summary(self) -> dict:
        return {
            "total_cost": self.total_cost,
            "wl_iterations": self.iterations_equivalent,
            "vertex_splits": self.vertex_split_count,
            "n": self.n,
        }
