import logging
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from app.exceptions import (
    ConverseEquivalenceError, IllegalMoveError, InvalidColoringError, LoopCapExceededError,
)
from app.models.aux_graph import AuxGraph, AuxTrace, AuxTraceStep
from app.models.game import (
    Algorithm1Outcome, Algorithm1Trace, AuxGrowthCheck, GameState, GameTranscript,
    Move, MoveKind, P1Strategy, P2Outcome, P2Strategy,
)
from app.models.graph import ColoredGraph, RefinementOrder
from app.models.schemas import HistoryTracker, RefinementVariant, ThresholdConfig
from app.services.aux_service import AuxService
from app.services.cleanup_service import CleanupService
from app.services.generator_service import make_rng
from app.services.graph_service import GraphService
from app.services.refinement_service import RefinementService

logger = logging.getLogger(__name__)

# Called once per Algorithm-1 loop turn with (iteration, graph, aux, stable, tracker)
LoopObserver = Callable[[int, ColoredGraph, AuxGraph, bool, HistoryTracker], None]


class GameService:
    """The two-player refinement game and its strategies"""

    @staticmethod
    def _register_all(tracker: HistoryTracker, graphs: Iterable[ColoredGraph], cfg: ThresholdConfig) -> HistoryTracker:
        for graph in graphs:
            tracker = AuxService.register_history(tracker, graph, cfg)
        return tracker

    @staticmethod
    def _move(player: int, kind: MoveKind, cost: int, graph: ColoredGraph) -> Move:
        return Move(
            player=player,
            kind=kind,
            cost=cost,
            class_counts=GraphService.class_counts(graph),
            graph_hash=GraphService.graph_hash(graph),
            resulting_graph=graph,
        )

    @staticmethod
    def _require_valid(g: ColoredGraph, move_index: Optional[int] = None) -> None:
        report = GraphService.validate(g)
        if not report.loop_edge_disjoint:
            raise InvalidColoringError("Loop colors and arc colors overlap", report=report)
        if not report.converse_equivalent:
            error = ConverseEquivalenceError("Game graphs must be converse-equivalent", report=report)
            if move_index is not None:
                error.detail = f"{error.detail} (move {move_index})"
            raise error

    @staticmethod
    def start_game(g: ColoredGraph, cfg: Optional[ThresholdConfig] = None,
                   variant: RefinementVariant = RefinementVariant.COUNTING) -> GameState:
        """Initial state with Player 1 to move"""
        GameService._require_valid(g)
        cfg = cfg or ThresholdConfig()
        return GameState(
            current=g,
            history=[g],
            tracker=AuxService.register_history(HistoryTracker(), g, cfg),
            threshold=cfg,
            variant=variant,
        )

    @staticmethod
    def apply_p1_move(s: GameState, g2: ColoredGraph, kind: MoveKind = MoveKind.P1_SPLIT) -> GameState:
        """Player 1 plays a proper refinement; costs 1"""
        index = len(s.moves)
        if s.is_over:
            raise IllegalMoveError("The game is over", move_index=index)
        if s.next_player != 1:
            raise IllegalMoveError("Player 2 is to move", move_index=index)
        relation = GraphService.compare(g2, s.current)
        if relation is not RefinementOrder.STRICTLY_FINER:
            raise IllegalMoveError(f"Player 1 must play a proper refinement, got {relation.value}",
                                   move_index=index)
        GameService._require_valid(g2, index)
        return s.model_copy(update={
            "current": g2,
            "history": s.history + [g2],
            "moves": s.moves + [GameService._move(1, kind, 1, g2)],
            "total_cost": s.total_cost + 1,
            "next_player": 2,
            "vertex_split_count": s.vertex_split_count + g2.vertex_class_count() - s.current.vertex_class_count(),
            "tracker": AuxService.register_history(s.tracker, g2, s.threshold),
        })

    @staticmethod
    def apply_p2_move(s: GameState, g2: ColoredGraph, kind: MoveKind = MoveKind.P2_STABILIZE,
                      cleanup_steps: int = 0, intermediates: Iterable[ColoredGraph] = ()) -> GameState:
        """Player 2 answers with G' where G refines to G' and G' to the stabilization.

        The cost is the number of refinement steps G' stands for; clean-up
        steps taken on the way are booked as a separate move.
        """
        index = len(s.moves)
        if s.next_player != 2:
            raise IllegalMoveError("Player 1 is to move", move_index=index)
        stable = RefinementService.stabilize(s.current, s.variant).stable_graph
        if not GraphService.is_finer_or_equal(g2, s.current):
            raise IllegalMoveError("Player 2 must not coarsen the current graph", move_index=index)
        if not GraphService.is_finer_or_equal(stable, g2):
            raise IllegalMoveError("Player 2 must not refine past the stabilization", move_index=index)
        cost = RefinementService.min_wl_cover(s.current, g2, s.variant, stable=stable)
        intermediates = list(intermediates)
        moves = list(s.moves)
        total = s.total_cost
        if cleanup_steps:
            moves.append(GameService._move(2, MoveKind.CLEANUP, 2 * cleanup_steps, g2))
            total += 2 * cleanup_steps
        moves.append(GameService._move(2, kind, cost, g2))
        return s.model_copy(update={
            "current": g2,
            "history": s.history + intermediates + [g2],
            "moves": moves,
            "total_cost": total + cost,
            "next_player": 1,
            "vertex_split_count": s.vertex_split_count + g2.vertex_class_count() - s.current.vertex_class_count(),
            "tracker": GameService._register_all(s.tracker, intermediates + [g2], s.threshold),
        })

    @staticmethod
    def split_random_class(g: ColoredGraph, rng: np.random.Generator) -> ColoredGraph:
        """Split one non-singleton color class in two, keeping converse equivalence.

        Loop classes split by vertices, asymmetric arc classes by ordered
        pairs (mirrored into the converse class), symmetric arc classes by
        unordered pairs; a symmetric class on a single unordered pair is
        split by orientation.
        """
        g = GraphService.canonical_renumber(g)
        palette = g.palette_size
        counts = np.bincount(g.colors.reshape(-1), minlength=palette)
        candidates = np.flatnonzero(counts >= 2)
        if candidates.size == 0:
            raise IllegalMoveError("A discrete coloring admits no proper refinement")
        converse = GraphService.converse_map(g)
        if converse is None:
            raise ConverseEquivalenceError("Random splits need a converse-equivalent coloring",
                                           report=GraphService.validate(g))
        color = int(candidates[rng.integers(candidates.size)])
        table = g.colors.copy()
        diag = np.diagonal(g.colors)
        fresh, fresh_converse = palette, palette + 1

        if np.any(diag == color):
            units = np.flatnonzero(diag == color)
        elif converse[color] != color:
            units = np.argwhere(g.colors == color)
        else:
            units = np.argwhere(np.triu(g.colors == color, 1))
            if len(units) == 1:
                u, v = units[0]
                table[u, v], table[v, u] = fresh, fresh_converse
                return GraphService.canonical_renumber(ColoredGraph.from_table(table))

        # units are in row-major order of the canonical table, so partition and seed fix the mask
        chosen = rng.integers(0, 2, size=len(units)).astype(bool)
        if chosen.all() or not chosen.any():
            chosen[rng.integers(len(units))] ^= True
        for unit in units[chosen]:
            if np.ndim(unit) == 0:
                table[unit, unit] = fresh
            elif converse[color] != color:
                u, v = unit
                table[u, v], table[v, u] = fresh, fresh_converse
            else:
                u, v = unit
                table[u, v] = table[v, u] = fresh
        return GraphService.canonical_renumber(ColoredGraph.from_table(table))

    @staticmethod
    def strategy_p1(s: GameState, kind: P1Strategy, rng: np.random.Generator) -> Tuple[ColoredGraph, MoveKind]:
        """Player 1's next graph and the kind of move it is"""
        if s.is_over:
            raise IllegalMoveError("No move exists on a discrete coloring", move_index=len(s.moves))
        if kind is P1Strategy.WL_STEP:
            refined = RefinementService.refine_step(s.current, s.variant)
            if refined.palette_size > s.current.palette_size:
                return refined, MoveKind.P1_WL_STEP
            logger.debug("wl-step has no effect on a stable graph; splitting randomly")
        return GameService.split_random_class(s.current, rng), MoveKind.P1_SPLIT

    @staticmethod
    def run_algorithm1(g: ColoredGraph, tracker: HistoryTracker, cfg: ThresholdConfig,
                       variant: RefinementVariant = RefinementVariant.COUNTING,
                       observer: Optional[LoopObserver] = None, move_index: int = 0) -> Algorithm1Outcome:
        """Clean up, then refine and clean up until the aux graph is triangle-stable"""
        cleaned = CleanupService.ccu(g, variant)
        steps = cleaned.clean_up_steps
        intermediates: List[ColoredGraph] = list(cleaned.intermediates)
        tracker = GameService._register_all(tracker, intermediates, cfg)
        current = cleaned.graph
        cap = cfg.loop_cap(g.n)
        loops = 0
        aux_sizes = []
        while True:
            aux = AuxService.build_aux(current, tracker)
            aux_sizes.append(aux.size)
            stable = AuxService.is_triangle_stable(aux)
            if observer is not None:
                observer(loops, current, aux, stable, tracker)
            if stable:
                break
            refined = RefinementService.refine_step(current, variant, require_converse=False)
            if refined.palette_size == current.palette_size:
                logger.warning("Graph is stable but its aux graph is not triangle-stable (n=%d, aux=%d nodes)",
                               g.n, aux.size)
                break
            step = CleanupService.ccu(refined, variant)
            steps += step.clean_up_steps
            intermediates += [refined] + step.intermediates
            tracker = GameService._register_all(tracker, [refined] + step.intermediates, cfg)
            current = step.graph
            loops += 1
            logger.debug("algorithm1 turn %d: %d classes, aux %d nodes", loops, current.palette_size, aux.size)
            if loops > cap:
                raise LoopCapExceededError(
                    f"Algorithm-1 loop exceeded its cap of {cap} iterations",
                    dump={"n": g.n, "loops": loops, "aux": aux.to_dump(), "aux_sizes": aux_sizes},
                )
        trace = Algorithm1Trace(
            move_index=move_index,
            loop_iterations=loops,
            cleanup_steps=steps,
            aux_stable=stable,
            aux_sizes=aux_sizes,
        )
        return Algorithm1Outcome(graph=current, tracker=tracker, trace=trace,
                                 cleanup_steps=steps, intermediates=intermediates)

    @staticmethod
    def strategy_p2(s: GameState, kind: P2Strategy) -> P2Outcome:
        if kind is P2Strategy.STABILIZE:
            stable = RefinementService.stabilize(s.current, s.variant).stable_graph
            return P2Outcome(graph=stable, kind=MoveKind.P2_STABILIZE)
        outcome = GameService.run_algorithm1(s.current, s.tracker, s.threshold, s.variant,
                                             move_index=len(s.moves))
        return P2Outcome(
            graph=outcome.graph,
            kind=MoveKind.P2_ALGORITHM1,
            cleanup_steps=outcome.cleanup_steps,
            intermediates=outcome.intermediates,
            trace=outcome.trace,
        )

    @staticmethod
    def _growth_check(move_index: int, before: ColoredGraph, tracker_before: HistoryTracker,
                      after: ColoredGraph, tracker_after: HistoryTracker) -> AuxGrowthCheck:
        aux_before = AuxService.build_aux(before, tracker_before)
        aux_after = AuxService.build_aux(after, tracker_after)
        contained = AuxService.aux_contains(aux_after, aux_before)
        grew = aux_after.size > aux_before.size or aux_after.edge_count() > aux_before.edge_count()
        return AuxGrowthCheck(
            move_index=move_index,
            contained=contained,
            strict=contained and grew,
            size_before=aux_before.size,
            size_after=aux_after.size,
            edges_before=aux_before.edge_count(),
            edges_after=aux_after.edge_count(),
        )

    @staticmethod
    def run_game(g: ColoredGraph, p1: P1Strategy = P1Strategy.RANDOM_SPLIT,
                 p2: P2Strategy = P2Strategy.STABILIZE, seed: int = 0,
                 cfg: Optional[ThresholdConfig] = None,
                 variant: RefinementVariant = RefinementVariant.COUNTING) -> GameTranscript:
        """Alternate strategy moves until the coloring is discrete"""
        cfg = cfg or ThresholdConfig()
        state = GameService.start_game(g, cfg, variant)
        iterations = RefinementService.stabilize(g, variant).iterations
        rng = make_rng(seed)
        potential_checks = []
        growth_checks = []
        traces = []
        while not state.is_over:
            if state.next_player == 1:
                before, tracker_before = state.current, state.tracker
                graph, kind = GameService.strategy_p1(state, p1, rng)
                state = GameService.apply_p1_move(state, graph, kind)
                cleaned = CleanupService.ccu(graph, variant)
                potential_checks.append(
                    AuxService.large_class_potential_check(before, cleaned.graph, cfg, variant))
                if (CleanupService.is_cleaned_up(before, variant)
                        and AuxService.refines_small_region(before, cleaned.graph, cfg)):
                    tracker_after = GameService._register_all(
                        state.tracker, cleaned.intermediates + [cleaned.graph], cfg)
                    growth_checks.append(GameService._growth_check(
                        len(state.moves) - 1, before, tracker_before, cleaned.graph, tracker_after))
                logger.debug("move %d: player 1 %s", len(state.moves), kind.value)
            else:
                outcome = GameService.strategy_p2(state, p2)
                state = GameService.apply_p2_move(state, outcome.graph, outcome.kind,
                                                  outcome.cleanup_steps, outcome.intermediates)
                if outcome.trace is not None:
                    traces.append(outcome.trace)
                logger.debug("move %d: player 2 %s", len(state.moves), outcome.kind.value)

        wl_cost = sum(m.cost for m in state.moves if m.official)
        logger.info("Game on n=%d finished: total cost %d, wl cost %d, %d moves",
                    g.n, state.total_cost, wl_cost, len(state.moves))
        return GameTranscript(
            n=g.n,
            p1=p1,
            p2=p2,
            seed=seed,
            moves=state.moves,
            total_cost=state.total_cost,
            wl_cost=wl_cost,
            iterations_equivalent=iterations,
            vertex_split_count=state.vertex_split_count,
            potential_checks=potential_checks,
            growth_checks=growth_checks,
            aux_sequence_length=len(growth_checks),
            aux_sequence_bound=cfg.aux_sequence_bound(g.n),
            algorithm1_traces=traces,
            final_graph=state.current,
        )

    @staticmethod
    def aux_trace(g: ColoredGraph, cfg: Optional[ThresholdConfig] = None,
                  variant: RefinementVariant = RefinementVariant.COUNTING) -> AuxTrace:
        """Run the Algorithm-1 loop on its own and dump the aux graph every turn"""
        cfg = cfg or ThresholdConfig()
        RefinementService.check_variant_input(g, variant)
        tracker = AuxService.register_history(HistoryTracker(), g, cfg)
        steps: List[AuxTraceStep] = []

        def record(iteration: int, graph: ColoredGraph, aux: AuxGraph, stable: bool, seen: HistoryTracker) -> None:
            inclusion = None
            if not stable and CleanupService.is_cleaned_up(graph, variant):
                inclusion = AuxService.triangle_inclusion_report(graph, seen, variant)
            steps.append(AuxTraceStep(
                iteration=iteration,
                aux=aux.to_dump(),
                triangle_stable=stable,
                vertex_classes=graph.vertex_class_count(),
                edge_classes=graph.edge_class_count(),
                inclusion=inclusion,
            ))

        outcome = GameService.run_algorithm1(g, tracker, cfg, variant, observer=record)
        failures = sum(1 for step in steps if step.inclusion is not None and not step.inclusion.holds)
        if failures:
            logger.info("aux-trace: %d turns where the completed aux graph was not contained after refinement",
                        failures)
        return AuxTrace(
            steps=steps,
            loop_iterations=outcome.trace.loop_iterations,
            cleanup_steps=outcome.cleanup_steps,
            aux_stable=outcome.trace.aux_stable,
            inclusion_failures=failures,
        )
