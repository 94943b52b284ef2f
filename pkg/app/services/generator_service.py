import logging

import networkx as nx
import numpy as np

from app.exceptions import InvalidParametersError
from app.models.graph import ColoredGraph
from app.models.schemas import FamilyKind, FamilySpec
from app.services.graph_service import GraphService

logger = logging.getLogger(__name__)

# Colors of the two-layer construction, before densification
_LOOP_A, _ARC_AA, _ARC_BB, _ARC_BA, _ARC_AB_NEAR, _ARC_AB_FAR, _LOOP_B = range(7)


def make_rng(seed: int) -> np.random.Generator:
    """The one seeded PCG64 stream behind every random choice: same seed, same draws"""
    return np.random.Generator(np.random.PCG64(seed))


class GeneratorService:
    """Seeded construction of the graph families used by experiments and tests"""

    @staticmethod
    def _require(spec: FamilySpec, *names: str) -> None:
        missing = [name for name in names if getattr(spec, name) is None]
        if missing:
            raise InvalidParametersError(
                f"Family '{spec.family.value}' requires parameter(s): {', '.join(missing)}")

    @staticmethod
    def _gnp_adjacency(n: int, p: float, seed: int) -> np.ndarray:
        upper = np.triu(make_rng(seed).random((n, n)) < p, 1)
        return upper | upper.T

    @staticmethod
    def appendix_a(t: int, shared_loop: bool = False) -> ColoredGraph:
        """The two-layer coloring on A = 0..t-1 and B = t..2t-1.

        Arcs a_i -> b_j are 'near' when i = j or i = j + 1 (mod t). With
        ``shared_loop`` both layers use one loop color.
        """
        if t < 1:
            raise InvalidParametersError("appendix_a needs t >= 1")
        n = 2 * t
        table = np.empty((n, n), dtype=np.int64)
        table[:t, :t] = _ARC_AA
        table[t:, t:] = _ARC_BB
        table[t:, :t] = _ARC_BA
        i = np.arange(t)[:, None]
        j = np.arange(t)[None, :]
        near = (i == j) | (i == (j + 1) % t)
        table[:t, t:] = np.where(near, _ARC_AB_NEAR, _ARC_AB_FAR)
        np.fill_diagonal(table, [_LOOP_A] * t + [_LOOP_A if shared_loop else _LOOP_B] * t)
        return ColoredGraph.from_table(table, converse_flag=False)

    @staticmethod
    def generate(spec: FamilySpec) -> ColoredGraph:
        family = spec.family
        if family is FamilyKind.APPENDIX_A:
            GeneratorService._require(spec, "t")
            return GeneratorService.appendix_a(spec.t, spec.shared_loop)

        GeneratorService._require(spec, "n")
        n = spec.n
        if family is FamilyKind.PATH:
            return GraphService.from_networkx(nx.path_graph(n))
        if family is FamilyKind.CYCLE:
            if n < 3:
                raise InvalidParametersError("A cycle needs n >= 3")
            return GraphService.from_networkx(nx.cycle_graph(n))
        if family is FamilyKind.COMPLETE:
            return GraphService.from_networkx(nx.complete_graph(n))
        if family is FamilyKind.STAR:
            return GraphService.from_networkx(nx.star_graph(n - 1))
        if family is FamilyKind.DISJOINT_CYCLES:
            GeneratorService._require(spec, "cycles")
            length, rest = divmod(n, spec.cycles)
            if rest or length < 3:
                raise InvalidParametersError(
                    f"Cannot split n={n} into {spec.cycles} cycles of equal length >= 3")
            graph = nx.disjoint_union_all([nx.cycle_graph(length) for _ in range(spec.cycles)])
            return GraphService.from_networkx(graph)
        if family is FamilyKind.GNP:
            GeneratorService._require(spec, "p")
            return GraphService.encode_undirected(GeneratorService._gnp_adjacency(n, spec.p, spec.seed))
        if family is FamilyKind.BOUNDED_COLOR_CLASS:
            GeneratorService._require(spec, "p", "t")
            adjacency = GeneratorService._gnp_adjacency(n, spec.p, spec.seed)
            classes = [v // spec.t for v in range(n)]
            return GraphService.encode_undirected(adjacency, classes)
        raise InvalidParametersError(f"Unknown family '{family}'")
