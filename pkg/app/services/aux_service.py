import logging
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.exceptions import ConsistencyError, InvalidParametersError
from app.models.aux_graph import LOWER, UPPER, AuxGraph, AuxNode, TriangleInclusionReport, subset_members
from app.models.graph import ColoredGraph
from app.models.schemas import (
    ClassSizeReport, HistoryTracker, PotentialCheck, PotentialValue,
    RefinementVariant, ThresholdConfig,
)
from app.services.cleanup_service import CleanupService
from app.services.graph_service import GraphService
from app.services.refinement_service import RefinementService

logger = logging.getLogger(__name__)


def _solve_clauses(clauses: Sequence[Tuple[np.ndarray, np.ndarray]], assignment: Optional[Dict[int, bool]] = None) -> bool:
    """Backtracking over free colors.

    Each clause is (exclude, include) boolean masks over colors; it holds
    once one of its colors is excluded resp. included.
    """
    if assignment is None:
        assignment = {}
    if not clauses:
        return True
    exclude, include = clauses[0]
    rest = clauses[1:]
    exclude_ids = np.flatnonzero(exclude).tolist()
    include_ids = np.flatnonzero(include).tolist()
    if any(assignment.get(x) is False for x in exclude_ids) or any(assignment.get(x) is True for x in include_ids):
        return _solve_clauses(rest, assignment)
    for x, value in [(x, False) for x in exclude_ids] + [(x, True) for x in include_ids]:
        if x in assignment:
            continue
        assignment[x] = value
        if _solve_clauses(rest, assignment):
            return True
        del assignment[x]
    return False


class AuxService:
    """Class-size threshold, potential, auxiliary graphs and triangle completion"""

    @staticmethod
    def classify_classes(g: ColoredGraph, cfg: ThresholdConfig) -> ClassSizeReport:
        t = cfg.t_of_n(g.n)
        classes = GraphService.vertex_classes(g)
        return ClassSizeReport(
            threshold=t,
            large=[c for c in classes if len(c) >= t],
            small=[c for c in classes if len(c) < t],
        )

    @staticmethod
    def potential_f(g: ColoredGraph) -> PotentialValue:
        """Sum over vertices of the number of distinct colors in the out-row"""
        return PotentialValue(f=int(AuxService.row_color_counts(g).sum()))

    @staticmethod
    def row_color_counts(g: ColoredGraph) -> np.ndarray:
        if g.n == 0:
            return np.zeros(0, dtype=np.int64)
        rows = np.sort(g.colors, axis=1)
        return 1 + np.count_nonzero(rows[:, 1:] != rows[:, :-1], axis=1)

    @staticmethod
    def register_history(tracker: HistoryTracker, g: ColoredGraph, cfg: ThresholdConfig) -> HistoryTracker:
        """Add every small vertex class of g to the tracker"""
        small = AuxService.classify_classes(g, cfg).small
        if not small or set(small) <= set(tracker.registered):
            return tracker
        return HistoryTracker(registered=tracker.registered + tuple(small))

    @staticmethod
    def aux_nodes(tracker: HistoryTracker) -> Tuple[AuxNode, ...]:
        """All (class, nonempty subset) pairs, classes in tracker order"""
        return tuple((members, mask) for members in tracker.registered
                     for mask in range(1, 1 << len(members)))

    @staticmethod
    def edge_condition(g: ColoredGraph, members: Sequence[int], subset: Sequence[int], target: Sequence[int]) -> bool:
        """Is there a color set S with v in subset <=> N+_S(v) = target for all v in members?"""
        target_mask = np.zeros(g.n, dtype=bool)
        target_mask[list(target)] = True
        chosen = set(subset)
        forced_in = set(g.colors[np.ix_(list(chosen), np.flatnonzero(target_mask))].reshape(-1).tolist())
        forced_out = set(g.colors[np.ix_(list(chosen), np.flatnonzero(~target_mask))].reshape(-1).tolist())
        if forced_in & forced_out:
            return False
        palette = g.palette_size
        clauses = []
        for v in members:
            if v in chosen:
                continue
            inside = set(g.colors[v, target_mask].tolist())
            outside = set(g.colors[v, ~target_mask].tolist())
            if inside & forced_out or outside & forced_in:
                continue
            free_in = inside - forced_in - forced_out
            free_out = outside - forced_in - forced_out
            if free_in & free_out:
                continue
            if not free_in and not free_out:
                return False
            exclude = np.zeros(palette, dtype=bool)
            include = np.zeros(palette, dtype=bool)
            exclude[list(free_in)] = True
            include[list(free_out)] = True
            clauses.append((exclude, include))
        return _solve_clauses(clauses)

    @staticmethod
    def build_aux(g: ColoredGraph, tracker: HistoryTracker) -> AuxGraph:
        """Aux(G) against the registered classes.

        For every registered class the member rows are one-hot encoded over
        the colors they use; forced inclusions/exclusions for all subsets M
        and all targets N are then evaluated as matrix products, leaving
        only multi-clause cases to the backtracking solver.
        """
        nodes = AuxService.aux_nodes(tracker)
        size = len(nodes)
        if size == 0:
            return AuxGraph(nodes=(), uu=np.zeros((0, 0), bool), ul=np.zeros((0, 0), bool))

        n = g.n
        targets = np.zeros((size, n), dtype=np.int64)
        for index, node in enumerate(nodes):
            targets[index, list(subset_members(node))] = 1
        outside = 1 - targets

        condition = np.zeros((size, size), dtype=bool)
        position = 0
        for members in tracker.registered:
            s = len(members)
            rows = g.colors[list(members)]
            _, local = np.unique(rows, return_inverse=True)
            local = local.reshape(s, n)
            k = int(local.max()) + 1
            onehot = np.eye(k, dtype=np.int64)[local]
            # reach_in[i, l, x]: member i sends color x into target l
            reach_in = np.einsum("ln,snk->slk", targets, onehot) > 0
            reach_out = np.einsum("ln,snk->slk", outside, onehot) > 0

            for mask in range(1, 1 << s):
                chosen = [i for i in range(s) if mask >> i & 1]
                forced_in = reach_in[chosen].any(axis=0)
                forced_out = reach_out[chosen].any(axis=0)
                ok = ~(forced_in & forced_out).any(axis=1)
                free = ~(forced_in | forced_out)
                pending = np.zeros(size, dtype=np.int64)
                clauses = []
                for j in range(s):
                    if mask >> j & 1:
                        continue
                    both = reach_in[j] & reach_out[j]
                    satisfied = ((reach_in[j] & forced_out).any(axis=1)
                                 | (reach_out[j] & forced_in).any(axis=1)
                                 | (both & free).any(axis=1))
                    exclude = reach_in[j] & free & ~reach_out[j]
                    include = reach_out[j] & free & ~reach_in[j]
                    ok &= satisfied | exclude.any(axis=1) | include.any(axis=1)
                    pending += ~satisfied
                    clauses.append((~satisfied, exclude, include))
                for target in np.flatnonzero(ok & (pending >= 2)).tolist():
                    open_clauses = [(exc[target], inc[target]) for is_open, exc, inc in clauses if is_open[target]]
                    ok[target] = _solve_clauses(open_clauses)
                condition[position + mask - 1] = ok
            position += (1 << s) - 1

        uu = condition & condition.T
        np.fill_diagonal(uu, False)
        return AuxGraph(nodes=nodes, uu=uu, ul=condition)

    @staticmethod
    def triangle_complete(h: AuxGraph) -> AuxGraph:
        """Apply both insertion rules once, against the input adjacency"""
        if h.size == 0:
            return h
        uu = h.uu.astype(np.int64)
        ul = h.ul.astype(np.int64)
        new_uu = h.uu | ((ul @ ul.T) > 0) | ((uu @ uu) > 0)
        np.fill_diagonal(new_uu, False)
        new_ul = h.ul | ((uu @ ul) > 0)
        return AuxGraph(nodes=h.nodes, uu=new_uu, ul=new_ul)

    @staticmethod
    def _structurally_stable(h: AuxGraph) -> bool:
        """Per component: uppers form a clique completely joined to the lowers"""
        graph = nx.Graph()
        graph.add_nodes_from((UPPER, i) for i in range(h.size))
        graph.add_nodes_from((LOWER, i) for i in range(h.size))
        graph.add_edges_from(((UPPER, int(i)), (UPPER, int(j))) for i, j in zip(*np.nonzero(h.uu)))
        graph.add_edges_from(((UPPER, int(i)), (LOWER, int(j))) for i, j in zip(*np.nonzero(h.ul)))
        for component in nx.connected_components(graph):
            uppers = sorted(i for side, i in component if side == UPPER)
            lowers = sorted(i for side, i in component if side == LOWER)
            block = h.uu[np.ix_(uppers, uppers)]
            if np.count_nonzero(block) != len(uppers) * (len(uppers) - 1):
                return False
            if lowers and not h.ul[np.ix_(uppers, lowers)].all():
                return False
        return True

    @staticmethod
    def is_triangle_stable(h: AuxGraph) -> bool:
        """Fixpoint test, cross-checked against the component structure"""
        fixpoint = AuxService.triangle_complete(h) == h
        structural = AuxService._structurally_stable(h)
        if fixpoint != structural:
            raise ConsistencyError(
                f"Triangle stability tests disagree (fixpoint={fixpoint}, structural={structural})")
        return fixpoint

    @staticmethod
    def triangle_closure(h: AuxGraph, limit: Optional[int] = None) -> Tuple[AuxGraph, int]:
        """Iterate triangle completion; returns the fixpoint and how many applications changed it"""
        applications = 0
        current = h
        while True:
            completed = AuxService.triangle_complete(current)
            if completed == current:
                return current, applications
            current = completed
            applications += 1
            if limit is not None and applications > limit:
                raise ConsistencyError(f"Triangle closure did not settle within {limit} applications")

    @staticmethod
    def add_edge(h: AuxGraph, a: Tuple[str, int], b: Tuple[str, int]) -> AuxGraph:
        """h plus one upper-upper or upper-lower edge"""
        if a[0] == LOWER:
            a, b = b, a
        if a[0] != UPPER or b[0] not in (UPPER, LOWER):
            raise InvalidParametersError("Only upper-upper and upper-lower edges are allowed")
        uu = h.uu.copy()
        ul = h.ul.copy()
        if b[0] == UPPER:
            if a[1] == b[1]:
                raise InvalidParametersError("Upper-upper edge needs two distinct nodes")
            uu[a[1], b[1]] = uu[b[1], a[1]] = True
        else:
            ul[a[1], b[1]] = True
        return AuxGraph(nodes=h.nodes, uu=uu, ul=ul)

    @staticmethod
    def aux_contains(big: AuxGraph, small: AuxGraph) -> bool:
        """Vertex- and edge-set inclusion by node key"""
        index = big.index()
        try:
            positions = np.array([index[node] for node in small.nodes], dtype=np.int64)
        except KeyError:
            return False
        if positions.size == 0:
            return True
        grid = np.ix_(positions, positions)
        return bool(np.all(big.uu[grid] | ~small.uu) and np.all(big.ul[grid] | ~small.ul))

    @staticmethod
    def triangle_inclusion_report(g: ColoredGraph, tracker: HistoryTracker,
                                  variant: RefinementVariant = RefinementVariant.COUNTING) -> TriangleInclusionReport:
        """Compare the triangle completion of Aux(G) with Aux of one refinement step"""
        completed = AuxService.triangle_complete(AuxService.build_aux(g, tracker))
        refined = AuxService.build_aux(RefinementService.refine_step(g, variant, require_converse=False), tracker)
        missing_uu = int(np.count_nonzero(completed.uu & ~refined.uu)) // 2
        missing_ul = int(np.count_nonzero(completed.ul & ~refined.ul))
        return TriangleInclusionReport(
            upper_upper_holds=missing_uu == 0,
            upper_lower_holds=missing_ul == 0,
            missing_upper_upper=missing_uu,
            missing_upper_lower=missing_ul,
        )

    @staticmethod
    def refines_small_region(g: ColoredGraph, g2: ColoredGraph, cfg: ThresholdConfig) -> bool:
        """Does g2 split a small vertex class of g, or an edge class between two small classes?"""
        small = AuxService.classify_classes(g, cfg).small
        if not small:
            return False
        diag2 = np.diagonal(g2.colors)
        if any(np.unique(diag2[list(c)]).size > 1 for c in small):
            return True
        in_small = np.zeros(g.n, dtype=bool)
        in_small[[v for c in small for v in c]] = True
        region = in_small[:, None] & in_small[None, :] & ~np.eye(g.n, dtype=bool)
        if not region.any():
            return False
        before = g.colors[region]
        joint = np.unique(before * g2.palette_size + g2.colors[region]).size
        return joint > np.unique(before).size

    @staticmethod
    def large_class_potential_check(before: ColoredGraph, after: ColoredGraph, cfg: ThresholdConfig,
                                    variant: RefinementVariant = RefinementVariant.COUNTING) -> PotentialCheck:
        """Potential gain of a cleaned-up move that refines a row inside a large class"""
        t = cfg.t_of_n(before.n)
        delta = AuxService.potential_f(after).f - AuxService.potential_f(before).f
        large = AuxService.classify_classes(before, cfg).large
        applicable = False
        if large and CleanupService.is_cleaned_up(before, variant) and CleanupService.is_cleaned_up(after, variant):
            diag_after = np.diagonal(after.colors)
            no_large_split = all(np.unique(diag_after[list(c)]).size == 1 for c in large)
            grown = AuxService.row_color_counts(after) > AuxService.row_color_counts(before)
            in_large = np.zeros(before.n, dtype=bool)
            in_large[[v for c in large for v in c]] = True
            applicable = no_large_split and bool((grown & in_large).any())
        return PotentialCheck(
            applicable=applicable,
            delta_f=delta,
            threshold=t,
            satisfied=(not applicable) or delta >= t,
        )
