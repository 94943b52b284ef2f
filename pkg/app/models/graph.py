from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator


class RefinementOrder(str, Enum):
    """Relation of the first partition to the second"""
    EQUAL = "equal"
    STRICTLY_FINER = "strictly-finer"
    STRICTLY_COARSER = "strictly-coarser"
    INCOMPARABLE = "incomparable"


class ColoredGraph(BaseModel):
    """A complete digraph with loops on vertices 0..n-1.

    ``colors[u, v]`` is the color of the ordered pair (u, v); diagonal
    entries are loop colors. Color IDs are dense: exactly 0..palette_size-1
    occur. The table is stored read-only so instances can be shared freely.
    ``labels`` optionally names each color ID, which lets two independently
    encoded graphs share a color namespace.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    colors: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    # False only for colorings built deliberately without converse equivalence
    converse_flag: bool = True

    @field_validator("colors", mode="before")
    @classmethod
    def validate_colors(cls, v) -> np.ndarray:
        """Ensure the table is square, non-negative and densely numbered"""
        table = np.array(v, dtype=np.int64, copy=True)
        if table.size == 0:
            table = table.reshape(0, 0)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError(f"Color table must be square, got shape {table.shape}")
        if table.size and table.min() < 0:
            raise ValueError("Color IDs must be non-negative")
        used = np.unique(table)
        if not np.array_equal(used, np.arange(used.size)):
            raise ValueError("Color IDs must be dense (0..palette_size-1)")
        table.setflags(write=False)
        return table

    @field_validator("labels")
    @classmethod
    def validate_labels(cls, v, info):
        if v is None:
            return v
        table = info.data.get("colors")
        if table is not None:
            palette = int(table.max()) + 1 if table.size else 0
            if len(v) != palette:
                raise ValueError(f"Expected {palette} labels, got {len(v)}")
        return tuple(str(label) for label in v)

    @field_serializer("colors")
    def serialize_colors(self, colors: np.ndarray) -> List[List[int]]:
        return colors.tolist()

    @classmethod
    def from_table(cls, table, labels=None, converse_flag: bool = True) -> "ColoredGraph":
        """Build a graph from an arbitrary non-negative table, densifying IDs.

        Relative order of the raw IDs is preserved, so an already dense
        table comes back unchanged. ``labels`` is indexed by raw ID.
        """
        raw = np.asarray(table, dtype=np.int64)
        if raw.size == 0:
            return cls(colors=raw.reshape(0, 0), labels=() if labels is not None else None,
                       converse_flag=converse_flag)
        used, inverse = np.unique(raw, return_inverse=True)
        dense = inverse.reshape(raw.shape)
        dense_labels = None
        if labels is not None:
            dense_labels = tuple(str(labels[c]) for c in used)
        return cls(colors=dense, labels=dense_labels, converse_flag=converse_flag)

    @property
    def n(self) -> int:
        return int(self.colors.shape[0])

    @property
    def palette_size(self) -> int:
        return int(self.colors.max()) + 1 if self.colors.size else 0

    @property
    def loop_colors(self) -> np.ndarray:
        return np.diagonal(self.colors)

    def vertex_class_count(self) -> int:
        return int(np.unique(self.loop_colors).size)

    def edge_class_count(self) -> int:
        return self.palette_size - self.vertex_class_count()

    def is_discrete(self) -> bool:
        return self.palette_size == self.n * self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColoredGraph):
            return NotImplemented
        return (np.array_equal(self.colors, other.colors)
                and self.labels == other.labels
                and self.converse_flag == other.converse_flag)

    def __hash__(self) -> int:
        return hash((self.colors.shape, self.colors.tobytes(), self.labels))

    def __repr__(self) -> str:
        return f"ColoredGraph(n={self.n}, palette_size={self.palette_size})"


class Witness(BaseModel):
    """Pairs demonstrating a violated structural property"""
    kind: str
    pairs: List[Tuple[int, int]]
    colors: List[int] = Field(default_factory=list)


class ValidationReport(BaseModel):
    loop_edge_disjoint: bool
    converse_equivalent: bool
    offending_pairs: List[Witness] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.offending_pairs


class ColorClass(BaseModel):
    color: int
    size: int
    is_loop: bool
    pairs: List[Tuple[int, int]]


class PartitionSummary(BaseModel):
    classes: List[ColorClass]
    vertex_classes: List[ColorClass]
    edge_classes: List[ColorClass]
