import logging
from typing import List, Set, Tuple

import numpy as np

from app.exceptions import ConsistencyError
from app.models.graph import ColoredGraph
from app.models.schemas import C2Violation, CleanupResult, ConditionReport, RefinementVariant
from app.services.graph_service import GraphService
from app.services.refinement_service import _dedupe_sorted

logger = logging.getLogger(__name__)


class CleanupService:
    """Conditions C1/C2 and the clean-up moves that restore them"""

    @staticmethod
    def _degree_rows(g: ColoredGraph, variant: RefinementVariant) -> Tuple[np.ndarray, np.ndarray, int]:
        """Sorted (arc color, class of the other end) codes per vertex, out and in.

        Two vertices have equal rows exactly when their color-degree vectors
        (color-set vectors for the set variant) agree.
        """
        cls, k = GraphService.vertex_class_index(g)
        out_codes = np.sort(g.colors * k + cls[None, :], axis=1)
        in_codes = np.sort(g.colors.T * k + cls[None, :], axis=1)
        if variant is RefinementVariant.SET:
            out_codes = _dedupe_sorted(out_codes)
            in_codes = _dedupe_sorted(in_codes)
        return out_codes, in_codes, k

    @staticmethod
    def _c1_violations(g: ColoredGraph) -> List[int]:
        n = g.n
        if n < 2:
            return []
        palette = g.palette_size
        diag = np.diagonal(g.colors)
        off = ~np.eye(n, dtype=bool)
        arcs = g.colors[off]
        tails = np.broadcast_to(diag[:, None], (n, n))[off]
        heads = np.broadcast_to(diag[None, :], (n, n))[off]
        bad: Set[int] = set()
        for ends in (tails, heads):
            joint = np.unique(arcs * palette + ends)
            colors, counts = np.unique(joint // palette, return_counts=True)
            bad.update(colors[counts > 1].tolist())
        return sorted(bad)

    @staticmethod
    def check_conditions(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> ConditionReport:
        """Report every C1 and C2 violation of g"""
        report = ConditionReport(c1_violations=CleanupService._c1_violations(g))
        if g.n == 0:
            return report
        out_rows, in_rows, k = CleanupService._degree_rows(g, variant)
        diag = np.diagonal(g.colors)
        class_colors = np.unique(diag)
        cls, _ = GraphService.vertex_class_index(g)
        seen = set()
        for direction, rows in (("out", out_rows), ("in", in_rows)):
            for index in range(k):
                members = np.flatnonzero(cls == index)
                first = members[0]
                for v in members[1:]:
                    differ = np.flatnonzero(rows[v] != rows[first])
                    if differ.size == 0:
                        continue
                    if variant is RefinementVariant.SET:
                        xor = np.setxor1d(rows[v], rows[first])
                        code = int(xor[xor >= 0].min())
                    else:
                        pos = differ[0]
                        code = int(min(rows[v, pos], rows[first, pos]))
                    color, target = divmod(code, k)
                    key = (color, index, target, direction)
                    if key in seen:
                        continue
                    seen.add(key)
                    degrees = (int(np.count_nonzero(rows[first] == code)),
                               int(np.count_nonzero(rows[v] == code)))
                    report.c2_violations.append(C2Violation(
                        color=color,
                        from_class=int(class_colors[index]),
                        to_class=int(class_colors[target]),
                        direction=direction,
                        witnesses=(int(first), int(v)),
                        degrees=degrees,
                    ))
        return report

    @staticmethod
    def is_cleaned_up(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> bool:
        return CleanupService.check_conditions(g, variant).holds

    @staticmethod
    def recolor_by_endpoints(g: ColoredGraph) -> ColoredGraph:
        """Move 1: every pair (u,v) gets (chi(u,v), chi(v,v), chi(u,u))"""
        if g.n == 0:
            return g
        palette = g.palette_size
        diag = np.diagonal(g.colors)
        triple = (g.colors * palette + diag[None, :]) * palette + diag[:, None]
        return GraphService.canonical_renumber(ColoredGraph.from_table(triple))

    @staticmethod
    def split_vertex_classes(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> ColoredGraph:
        """Move 2: recolor loops by the full color-degree vector, arcs untouched"""
        if g.n == 0:
            return g
        out_rows, in_rows, _ = CleanupService._degree_rows(g, variant)
        diag = np.diagonal(g.colors)
        rows = np.concatenate([diag[:, None], out_rows, in_rows], axis=1)
        _, loops = np.unique(rows, axis=0, return_inverse=True)
        table = g.colors.copy()
        np.fill_diagonal(table, g.palette_size + loops.reshape(-1))
        return GraphService.canonical_renumber(ColoredGraph.from_table(table))

    @staticmethod
    def cleanup_step(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> ColoredGraph:
        """One two-move clean-up step"""
        return CleanupService.split_vertex_classes(CleanupService.recolor_by_endpoints(g), variant)

    @staticmethod
    def ccu(g: ColoredGraph, variant: RefinementVariant = RefinementVariant.COUNTING) -> CleanupResult:
        """Complete clean-up: step until C1 and C2 hold together"""
        current = GraphService.canonical_renumber(g)
        start_classes = current.vertex_class_count()
        intermediates = []
        steps = 0
        while not CleanupService.is_cleaned_up(current, variant):
            before = current.vertex_class_count()
            current = CleanupService.cleanup_step(current, variant)
            steps += 1
            intermediates.append(current)
            split = current.vertex_class_count() > before
            if not split and not CleanupService.is_cleaned_up(current, variant):
                raise ConsistencyError("A non-final clean-up step did not split a vertex class")
            if steps > g.n + 1:
                raise ConsistencyError(f"Complete clean-up did not finish after {steps} steps")
        if steps:
            logger.debug("ccu: %d steps, %d vertex splits", steps,
                         current.vertex_class_count() - start_classes)
        return CleanupResult(
            graph=current,
            clean_up_steps=steps,
            vertex_splits=current.vertex_class_count() - start_classes,
            moves=2 * steps,
            intermediates=intermediates,
        )
