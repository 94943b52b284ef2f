import logging
from typing import List, Optional, Tuple

import numpy as np

from app.config import WL_BLOCK_ELEMENTS
from app.exceptions import (
    ConsistencyError, ConverseEquivalenceError, IllegalMoveError, InvalidParametersError,
)
from app.models.graph import ColoredGraph, ValidationReport
from app.models.schemas import (
    DistinguishVerdict, RefinementVariant, StabilizationResult, Wl1Result,
)
from app.services.graph_service import GraphService

logger = logging.getLogger(__name__)


def _dedupe_sorted(codes: np.ndarray) -> np.ndarray:
    """Turn sorted multiset rows into set rows (duplicates become -1, front-packed)"""
    dup = np.zeros(codes.shape, dtype=bool)
    dup[..., 1:] = codes[..., 1:] == codes[..., :-1]
    codes = np.where(dup, -1, codes)
    codes.sort(axis=-1)
    return codes


def _group_rows(blocks: List[np.ndarray]) -> np.ndarray:
    """Dense IDs for signature rows, numbered in lexicographic row order.

    Rows are grouped block by block and the per-block uniques merged, so
    the full signature matrix never has to exist at once.
    """
    local_uniques = []
    local_inverses = []
    for rows in blocks:
        uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
        local_uniques.append(uniq)
        local_inverses.append(inverse.reshape(-1))
    _, merged_inverse = np.unique(np.concatenate(local_uniques), axis=0, return_inverse=True)
    merged_inverse = merged_inverse.reshape(-1)
    ids = []
    offset = 0
    for uniq, inverse in zip(local_uniques, local_inverses):
        ids.append(merged_inverse[offset + inverse])
        offset += uniq.shape[0]
    return np.concatenate(ids)


class RefinementService:
    """2-WL refinement operators, stabilization and color refinement"""

    @staticmethod
    def check_loop_edge_disjoint(g: ColoredGraph) -> ValidationReport:
        """Raise InvalidParametersError when a color is used on a loop and an arc"""
        report = GraphService.validate(g)
        if not report.loop_edge_disjoint:
            overlap = next(w for w in report.offending_pairs if w.kind == "loop-edge-overlap")
            raise InvalidParametersError(
                f"color {overlap.colors[0]} is used on loop {overlap.pairs[0]} and arc {overlap.pairs[1]}"
            )
        return report

    @staticmethod
    def check_variant_input(g: ColoredGraph, variant: RefinementVariant) -> None:
        """Raise when g shares a color between loops and arcs, or when the
        variant needs converse equivalence and g lacks it"""
        report = RefinementService.check_loop_edge_disjoint(g)
        if variant.requires_converse and not report.converse_equivalent:
            raise ConverseEquivalenceError(
                f"{variant.value} refinement requires a converse-equivalent coloring",
                report=report,
            )

    @staticmethod
    def _signature_blocks(table: np.ndarray, variant: RefinementVariant) -> List[np.ndarray]:
        n = table.shape[0]
        palette = int(table.max()) + 1
        if variant is RefinementVariant.CONVERSE_AWARE:
            # (chi(w,v2), chi(v2,w)) and (chi(v1,w), chi(w,v1)) as dense pair ids
            _, head = np.unique((table.T * palette + table).reshape(-1), return_inverse=True)
            _, tail = np.unique((table * palette + table.T).reshape(-1), return_inverse=True)
            head = head.reshape(n, n)
            tail = tail.reshape(n, n)
            base = int(tail.max()) + 1
        else:
            head = table.T
            tail = table
            base = palette

        rows_per_block = max(1, WL_BLOCK_ELEMENTS // max(1, n * n))
        blocks = []
        for start in range(0, n, rows_per_block):
            stop = min(n, start + rows_per_block)
            # codes[v1, v2, w] encodes the component tuple for third vertex w
            codes = head[None, :, :] * base + tail[start:stop, None, :]
            codes = np.sort(codes, axis=-1)
            if variant is RefinementVariant.SET:
                codes = _dedupe_sorted(codes)
            old = table[start:stop, :, None]
            rows = np.concatenate([old, codes], axis=-1).reshape(-1, n + 1)
            blocks.append(rows)
        return blocks

    @staticmethod
    def refine_step(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING,
                    require_converse: bool = True) -> ColoredGraph:
        """One refinement step; the result is canonically renumbered.

        ``require_converse=False`` applies the operator literally even when
        the variant expects converse equivalence.
        """
        if require_converse:
            RefinementService.check_variant_input(g, variant)
        if g.n == 0:
            return g
        blocks = RefinementService._signature_blocks(g.colors, variant)
        new = _group_rows(blocks).reshape(g.n, g.n)
        return GraphService.canonical_renumber(ColoredGraph(colors=new))

    @staticmethod
    def refine_sequence(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING,
                        steps: int = 1) -> List[ColoredGraph]:
        """G^(0) .. G^(steps)"""
        RefinementService.check_variant_input(g, variant)
        sequence = [GraphService.canonical_renumber(g)]
        for _ in range(steps):
            sequence.append(RefinementService.refine_step(sequence[-1], variant, require_converse=False))
        return sequence

    @staticmethod
    def stabilize(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> StabilizationResult:
        """Iterate refine_step to the fixpoint and count the iterations"""
        RefinementService.check_variant_input(g, variant)
        current = GraphService.canonical_renumber(g)
        trace = [GraphService.class_counts(current)]
        iterations = 0
        bound = max(0, g.n * g.n - 1)
        while True:
            refined = RefinementService.refine_step(current, variant, require_converse=False)
            # refinement is monotone, so an unchanged class count means Equal
            if refined.palette_size == current.palette_size:
                break
            current = refined
            iterations += 1
            trace.append(GraphService.class_counts(current))
            if iterations > bound:
                raise ConsistencyError(f"Stabilization exceeded n^2 - 1 = {bound} iterations")
        logger.debug("Stabilized n=%d under %s in %d iterations", g.n, variant.value, iterations)
        return StabilizationResult(
            stable_graph=current,
            iterations=iterations,
            trace=trace,
            variant=variant,
        )

    @staticmethod
    def is_stable(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> bool:
        refined = RefinementService.refine_step(g, variant, require_converse=False)
        return refined.palette_size == g.palette_size

    @staticmethod
    def wl1_stabilize(g: ColoredGraph) -> Wl1Result:
        """Color refinement on vertices, reading arc colors as edge labels"""
        n = g.n
        vertex = np.unique(np.diagonal(g.colors), return_inverse=True)[1].reshape(-1) if n else np.zeros(0, np.int64)
        iterations = 0
        if n:
            arc = g.colors.copy()
            base = n + 1
            while True:
                codes = arc * base + vertex[None, :]
                np.fill_diagonal(codes, -1)
                codes = np.sort(codes, axis=1)
                rows = np.concatenate([vertex[:, None], codes], axis=1)
                _, refined = np.unique(rows, axis=0, return_inverse=True)
                refined = refined.reshape(-1)
                if refined.max() == vertex.max():
                    break
                vertex = refined
                iterations += 1
        classes = [np.flatnonzero(vertex == c).tolist() for c in range(int(vertex.max()) + 1)] if n else []
        return Wl1Result(vertex_colors=vertex.tolist(), classes=classes, iterations=iterations)

    @staticmethod
    def _witness(first: np.ndarray, second: np.ndarray, size: int) -> Tuple[Optional[int], Optional[Tuple[int, int]]]:
        counts_a = np.bincount(first.reshape(-1), minlength=size)
        counts_b = np.bincount(second.reshape(-1), minlength=size)
        differing = np.flatnonzero(counts_a != counts_b)
        if differing.size == 0:
            return None, None
        color = int(differing[0])
        return color, (int(counts_a[color]), int(counts_b[color]))

    @staticmethod
    def distinguish(g: ColoredGraph, h: ColoredGraph,
                    variant: RefinementVariant = RefinementVariant.COUNTING) -> DistinguishVerdict:
        """Stabilize the disjoint union and compare color-class sizes of the halves"""
        RefinementService.check_variant_input(g, variant)
        RefinementService.check_variant_input(h, variant)
        n = g.n
        union = GraphService.disjoint_union(g, h)
        if g.n != h.n:
            color, counts = RefinementService._witness(
                union.colors[:n, :n], union.colors[n:, n:], union.palette_size)
            return DistinguishVerdict(distinguished=True, witness_color=color, witness_counts=counts,
                                      iterations_used=0, mode=variant.value)
        result = RefinementService.stabilize(union, variant)
        stable = result.stable_graph.colors
        color, counts = RefinementService._witness(stable[:n, :n], stable[n:, n:],
                                                   result.stable_graph.palette_size)
        return DistinguishVerdict(
            distinguished=color is not None,
            witness_color=color,
            witness_counts=counts,
            iterations_used=result.iterations,
            mode=variant.value,
        )

    @staticmethod
    def distinguish_wl1(g: ColoredGraph, h: ColoredGraph) -> DistinguishVerdict:
        """Color-refinement verdict on the disjoint union"""
        RefinementService.check_loop_edge_disjoint(g)
        RefinementService.check_loop_edge_disjoint(h)
        n = g.n
        union = GraphService.disjoint_union(g, h)
        if g.n != h.n:
            diag = np.diagonal(union.colors)
            color, counts = RefinementService._witness(diag[:n], diag[n:], union.palette_size)
            return DistinguishVerdict(distinguished=True, witness_color=color, witness_counts=counts,
                                      iterations_used=0, mode="wl1")
        result = RefinementService.wl1_stabilize(union)
        vertex = np.asarray(result.vertex_colors, dtype=np.int64)
        color, counts = RefinementService._witness(vertex[:n], vertex[n:], len(result.classes))
        return DistinguishVerdict(
            distinguished=color is not None,
            witness_color=color,
            witness_counts=counts,
            iterations_used=result.iterations,
            mode="wl1",
        )

    @staticmethod
    def min_wl_cover(g: ColoredGraph, target: ColoredGraph,
                     variant: RefinementVariant = RefinementVariant.COUNTING,
                     stable: Optional[ColoredGraph] = None) -> int:
        """Smallest j with target coarser-or-equal than G^(j)"""
        if stable is None:
            stable = RefinementService.stabilize(g, variant).stable_graph
        if not GraphService.is_finer_or_equal(target, g):
            raise IllegalMoveError("Target does not refine the starting graph")
        if not GraphService.is_finer_or_equal(stable, target):
            raise IllegalMoveError("Target is finer than the stabilization")
        current = g
        j = 0
        while not GraphService.is_finer_or_equal(current, target):
            current = RefinementService.refine_step(current, variant, require_converse=False)
            j += 1
        return j
