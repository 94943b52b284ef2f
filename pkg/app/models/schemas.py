import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.graph import ColoredGraph


class RefinementVariant(str, Enum):
    COUNTING = "counting"
    CONVERSE_AWARE = "converse-aware"
    SET = "set"

    @property
    def requires_converse(self) -> bool:
        return self is not RefinementVariant.CONVERSE_AWARE


class StabilizationResult(BaseModel):
    stable_graph: ColoredGraph
    iterations: int = Field(..., ge=0)
    # (vertex classes, edge classes) of G^(0) .. G^(k)
    trace: List[Tuple[int, int]]
    variant: RefinementVariant


class Wl1Result(BaseModel):
    """Stable vertex coloring of color refinement"""
    vertex_colors: List[int]
    classes: List[List[int]]
    iterations: int = Field(..., ge=0)


class DistinguishVerdict(BaseModel):
    distinguished: bool
    witness_color: Optional[int] = None
    # pair (or vertex) counts of the witness color in the first and second graph
    witness_counts: Optional[Tuple[int, int]] = None
    iterations_used: int = Field(0, ge=0)
    mode: str = RefinementVariant.COUNTING.value

    @model_validator(mode="after")
    def check_witness(self) -> "DistinguishVerdict":
        if self.distinguished != (self.witness_color is not None):
            raise ValueError("A verdict is distinguished exactly when it names a witness color")
        return self


class C2Violation(BaseModel):
    color: int
    from_class: int
    to_class: int
    direction: str
    witnesses: Tuple[int, int]
    degrees: Tuple[int, int]


class ConditionReport(BaseModel):
    c1_violations: List[int] = Field(default_factory=list)
    c2_violations: List[C2Violation] = Field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.c1_violations and not self.c2_violations


class CleanupResult(BaseModel):
    graph: ColoredGraph
    clean_up_steps: int = Field(0, ge=0)
    vertex_splits: int = Field(0, ge=0)
    moves: int = Field(0, ge=0)
    intermediates: List[ColoredGraph] = Field(default_factory=list, exclude=True)


class ThresholdConfig(BaseModel):
    """Large/small class threshold t(n); log2(n)/2 unless fixed"""
    model_config = ConfigDict(frozen=True)

    fixed_t: Optional[float] = Field(None, gt=0)

    def t_of_n(self, n: int) -> float:
        if self.fixed_t is not None:
            return float(self.fixed_t)
        return math.log2(n) / 2 if n >= 1 else 0.0

    def ceil_t(self, n: int) -> int:
        return math.ceil(self.t_of_n(n))

    def loop_cap(self, n: int) -> int:
        return 8 * n * 2 ** self.ceil_t(n) + 64

    def aux_sequence_bound(self, n: int) -> float:
        return 4 * n * 2 ** self.t_of_n(n)


class ClassSizeReport(BaseModel):
    threshold: float
    large: List[Tuple[int, ...]]
    small: List[Tuple[int, ...]]


class HistoryTracker(BaseModel):
    """Vertex sets that formed a small vertex color class in some played graph"""
    model_config = ConfigDict(frozen=True)

    registered: Tuple[Tuple[int, ...], ...] = ()

    @field_validator("registered")
    @classmethod
    def normalize(cls, v):
        return tuple(sorted({tuple(sorted(c)) for c in v if c}))

    def __len__(self) -> int:
        return len(self.registered)


class PotentialValue(BaseModel):
    f: int = Field(..., ge=0)


class PotentialCheck(BaseModel):
    """Large-class potential step observed on one move"""
    applicable: bool
    delta_f: int
    threshold: float
    satisfied: bool


class FamilyKind(str, Enum):
    PATH = "path"
    CYCLE = "cycle"
    DISJOINT_CYCLES = "disjoint_cycles"
    GNP = "gnp"
    BOUNDED_COLOR_CLASS = "bounded_color_class"
    APPENDIX_A = "appendix_a"
    COMPLETE = "complete"
    STAR = "star"


class FamilySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: FamilyKind
    n: Optional[int] = Field(None, ge=1)
    p: Optional[float] = Field(None, ge=0, le=1)
    t: Optional[int] = Field(None, ge=1)
    cycles: Optional[int] = Field(None, ge=1)
    shared_loop: bool = False
    seed: int = 0

    def params(self) -> Dict[str, object]:
        return self.model_dump(exclude={"family", "seed"}, exclude_none=True)


class ExperimentRecord(BaseModel):
    family: str
    params: Dict[str, object] = Field(default_factory=dict)
    source: Optional[str] = None
    variant: RefinementVariant
    n: int
    seed: Optional[int] = None
    iterations: int
    wl1_iterations: Optional[int] = None
    vertex_classes_final: int
    edge_classes_final: int
    wall_time_ms: float
    bound_ratios: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_trivial_bound(self) -> "ExperimentRecord":
        if self.n >= 1 and self.iterations > self.n * self.n - 1:
            raise ValueError(f"iterations {self.iterations} exceed n^2 - 1 for n={self.n}")
        return self


class InstanceFailure(BaseModel):
    n: int
    seed: int
    detail: str


class SweepAggregate(BaseModel):
    n: int
    instances: int
    max_iterations: int
    mean_iterations: float
    max_ratios: Dict[str, float] = Field(default_factory=dict)


class SweepReport(BaseModel):
    records: List[ExperimentRecord]
    aggregates: List[SweepAggregate]
    failures: List[InstanceFailure] = Field(default_factory=list)


class ColoredGraphDocument(BaseModel):
    """JSON form of a colored graph: row-major color list"""
    n: int = Field(..., ge=0)
    colors: List[int]
    labels: Optional[List[str]] = None

    @model_validator(mode="after")
    def check_size(self) -> "ColoredGraphDocument":
        if len(self.colors) != self.n * self.n:
            raise ValueError(f"Expected {self.n * self.n} colors for n={self.n}, got {len(self.colors)}")
        if any(c < 0 for c in self.colors):
            raise ValueError("Color IDs must be non-negative")
        return self
