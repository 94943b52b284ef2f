from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

# (registered class as sorted vertex tuple, subset bitmask over that tuple)
AuxNode = Tuple[Tuple[int, ...], int]

UPPER = "upper"
LOWER = "lower"


def subset_members(node: AuxNode) -> Tuple[int, ...]:
    members, mask = node
    return tuple(v for i, v in enumerate(members) if mask >> i & 1)


class AuxGraph(BaseModel):
    """Upper and lower copies of the same node list.

    ``uu[i, j]`` marks an edge between upper nodes i and j (symmetric,
    zero diagonal); ``ul[i, j]`` an edge between upper node i and lower
    node j. Lower nodes are never adjacent to each other.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: Tuple[AuxNode, ...]
    uu: np.ndarray
    ul: np.ndarray

    @field_validator("uu", "ul", mode="before")
    @classmethod
    def as_bool_matrix(cls, v) -> np.ndarray:
        matrix = np.array(v, dtype=bool, copy=True)
        if matrix.size == 0:
            matrix = matrix.reshape(0, 0)
        matrix.setflags(write=False)
        return matrix

    @property
    def size(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return int(np.count_nonzero(self.uu)) // 2 + int(np.count_nonzero(self.ul))

    def index(self) -> Dict[AuxNode, int]:
        return {node: i for i, node in enumerate(self.nodes)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, AuxGraph):
            return NotImplemented
        return (self.nodes == other.nodes
                and np.array_equal(self.uu, other.uu)
                and np.array_equal(self.ul, other.ul))

    def __hash__(self) -> int:
        return hash((self.nodes, self.uu.tobytes(), self.ul.tobytes()))

    def to_dump(self) -> dict:
        """JSON-ready dump: node lists for both sides and [side, index] edge pairs"""
        node_list = [{"class": list(members), "subset_mask": mask} for members, mask in self.nodes]
        edges: List[List[List[object]]] = []
        for i, j in zip(*np.nonzero(np.triu(self.uu, 1))):
            edges.append([[UPPER, int(i)], [UPPER, int(j)]])
        for i, j in zip(*np.nonzero(self.ul)):
            edges.append([[UPPER, int(i)], [LOWER, int(j)]])
        return {"upper": node_list, "lower": node_list, "edges": edges}


class TriangleInclusionReport(BaseModel):
    """Which edges of the completed aux graph survive one refinement step"""
    upper_upper_holds: bool
    upper_lower_holds: bool
    missing_upper_upper: int = 0
    missing_upper_lower: int = 0

    @property
    def holds(self) -> bool:
        return self.upper_upper_holds and self.upper_lower_holds


class AuxTraceStep(BaseModel):
    iteration: int
    aux: dict
    triangle_stable: bool
    vertex_classes: int
    edge_classes: int
    inclusion: Optional[TriangleInclusionReport] = None


class AuxTrace(BaseModel):
    steps: List[AuxTraceStep]
    loop_iterations: int
    cleanup_steps: int
    aux_stable: bool
    inclusion_failures: int = 0
