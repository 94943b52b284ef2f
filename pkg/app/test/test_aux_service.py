"""
Unit tests for class sizes, the potential and auxiliary graphs
Run with: pytest app/test/test_aux_service.py
"""
import numpy as np
import pytest

from app.exceptions import InvalidParametersError
from app.models.aux_graph import LOWER, UPPER, AuxGraph
from app.models.graph import ColoredGraph
from app.models.schemas import FamilyKind, FamilySpec, HistoryTracker, ThresholdConfig
from app.services.aux_service import AuxService
from app.services.cleanup_service import CleanupService
from app.services.game_service import GameService
from app.services.generator_service import GeneratorService, make_rng
from app.services.graph_service import GraphService
from app.services.refinement_service import RefinementService
from app.test.reference import aux_edge_literal


def edgeless(n: int, vertex_colors) -> ColoredGraph:
    return GraphService.encode_edges(n, [], vertex_colors)


def matching_instance() -> ColoredGraph:
    """a1=0, a2=1, b1=2, b2=3; A->B arcs colored by a perfect matching"""
    return ColoredGraph.from_table([
        [0, 2, 4, 5],
        [2, 0, 5, 4],
        [6, 7, 1, 3],
        [7, 6, 3, 1],
    ])


def blank_aux(size: int) -> AuxGraph:
    nodes = tuple(((i,), 1) for i in range(size))
    return AuxGraph(nodes=nodes, uu=np.zeros((size, size), bool), ul=np.zeros((size, size), bool))


def stable_block() -> AuxGraph:
    """Uppers 0,1 form a clique joined to lowers 0,1; node 2 is isolated"""
    h = blank_aux(3)
    uu = h.uu.copy()
    ul = h.ul.copy()
    uu[0, 1] = uu[1, 0] = True
    ul[:2, :2] = True
    return AuxGraph(nodes=h.nodes, uu=uu, ul=ul)


def random_stable_aux(rng) -> AuxGraph:
    """Upper blocks as cliques joined to their lowers; some lowers left isolated.

    Uppers 0 and 1 sit in different blocks, so at least one non-edge exists.
    """
    size = int(rng.integers(3, 11))
    upper_block = rng.integers(0, 3, size=size)
    upper_block[:2] = [0, 1]
    lower_block = rng.integers(-1, 3, size=size)
    uu = upper_block[:, None] == upper_block[None, :]
    np.fill_diagonal(uu, False)
    ul = upper_block[:, None] == lower_block[None, :]
    return AuxGraph(nodes=blank_aux(size).nodes, uu=uu, ul=ul)


def random_non_edge(h: AuxGraph, rng):
    """A uniformly drawn missing upper-upper or upper-lower pair, or None"""
    uu = [((UPPER, int(i)), (UPPER, int(j))) for i, j in np.argwhere(np.triu(~h.uu, 1))]
    ul = [((UPPER, int(i)), (LOWER, int(j))) for i, j in np.argwhere(~h.ul)]
    candidates = uu + ul
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


class TestClassSizes:
    """Test cases for the large/small threshold"""

    def test_threshold_sixteen(self):
        """Test that with n = 16 classes of size 2 are large and singletons small"""
        g = edgeless(16, [v // 2 for v in range(14)] + [100, 101])
        report = AuxService.classify_classes(g, ThresholdConfig())
        assert report.threshold == 2
        assert len(report.large) == 7
        assert report.small == [(14,), (15,)]

    def test_uniform_class_is_large(self):
        """Test that the single class of K_n is large"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.COMPLETE, n=6))
        report = AuxService.classify_classes(g, ThresholdConfig())
        assert report.large == [tuple(range(6))]
        assert report.small == []

    def test_discrete_vertex_coloring_is_small(self):
        """Test that all singleton classes are small for n = 16"""
        report = AuxService.classify_classes(edgeless(16, list(range(16))), ThresholdConfig())
        assert len(report.small) == 16

    def test_fixed_threshold(self):
        """Test a fixed real-valued threshold and the derived bounds"""
        cfg = ThresholdConfig(fixed_t=2.5)
        assert cfg.t_of_n(1000) == 2.5
        assert cfg.ceil_t(1000) == 3
        assert cfg.loop_cap(10) == 8 * 10 * 8 + 64


class TestPotential:
    """Test cases for the potential f"""

    def test_discrete(self):
        """Test that a discrete coloring has f = n^2"""
        g = ColoredGraph.from_table(np.arange(25).reshape(5, 5))
        assert AuxService.potential_f(g).f == 25

    def test_uniform_complete_graph(self):
        """Test that uniform K_n has f = 2n"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.COMPLETE, n=5))
        assert AuxService.potential_f(g).f == 10

    def test_path_p3(self):
        """Test the P3 value: endpoints see three colors, the middle two"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.PATH, n=3))
        assert AuxService.potential_f(g).f == 8

    @pytest.mark.parametrize("seed", range(5))
    def test_non_decreasing_under_refinement(self, seed):
        """Test n <= f <= n^2 and growth along the refinement sequence"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.GNP, n=8, p=0.5, seed=seed))
        values = [AuxService.potential_f(h).f
                  for h in RefinementService.refine_sequence(g, steps=3)]
        assert values == sorted(values)
        assert all(8 <= f <= 64 for f in values)


class TestHistoryTracker:
    """Test cases for registering small classes"""

    def test_no_small_classes(self):
        """Test that a graph without small classes leaves the tracker alone"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.COMPLETE, n=4))
        tracker = HistoryTracker()
        assert AuxService.register_history(tracker, g, ThresholdConfig()) is tracker

    def test_idempotent(self):
        """Test set semantics when the same graph is registered twice"""
        g = edgeless(4, [0, 1, 1, 1])
        cfg = ThresholdConfig(fixed_t=4)
        once = AuxService.register_history(HistoryTracker(), g, cfg)
        twice = AuxService.register_history(once, g, cfg)
        assert once == twice
        assert len(twice) == 2

    def test_split_history(self):
        """Test that a split class and its parts are all registered"""
        cfg = ThresholdConfig(fixed_t=4)
        before = edgeless(4, [0, 1, 1, 1])
        after = edgeless(4, [0, 1, 2, 2])
        tracker = AuxService.register_history(HistoryTracker(), before, cfg)
        tracker = AuxService.register_history(tracker, after, cfg)
        assert {(1, 2, 3), (1,), (2, 3)} <= set(tracker.registered)

    def test_refinement_history_stays_within_2n(self):
        """Test that the classes seen along a refinement sequence number at most 2n"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.PATH, n=10))
        cfg = ThresholdConfig(fixed_t=11)
        tracker = HistoryTracker()
        for graph in RefinementService.refine_sequence(g, steps=5):
            tracker = AuxService.register_history(tracker, graph, cfg)
        assert len(tracker) >= 2
        assert len(tracker) <= 2 * g.n


class TestBuildAux:
    """Test cases for the auxiliary graph"""

    def test_node_set(self):
        """Test that every nonempty subset of every registered class appears once"""
        tracker = HistoryTracker(registered=[(0, 1), (2, 3, 4)])
        nodes = AuxService.aux_nodes(tracker)
        assert len(nodes) == 3 + 7
        g = edgeless(5, [0, 0, 1, 1, 1])
        h = AuxService.build_aux(g, tracker)
        assert h.size == 10
        assert not np.any(np.diagonal(h.uu))
        assert np.array_equal(h.uu, h.uu.T)

    def test_matching_edge(self):
        """Test the upper ({a1,a2},{a1}) - lower ({b1,b2},{b1}) edge through the matching color"""
        g = matching_instance()
        tracker = AuxService.register_history(HistoryTracker(), g, ThresholdConfig(fixed_t=3))
        assert tracker.registered == ((0, 1), (2, 3))
        h = AuxService.build_aux(g, tracker)
        index = h.index()
        assert h.ul[index[(0, 1), 0b01], index[(2, 3), 0b01]]
        assert AuxService.edge_condition(g, (0, 1), (0,), (2,))

    @pytest.mark.parametrize("seed", range(6))
    def test_full_classes_joined_on_cleaned_graph(self, seed):
        """Test the (C,C) - (D,D) edge for current classes of a cleaned-up graph"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.BOUNDED_COLOR_CLASS, n=6, p=0.5, t=2, seed=seed))
        cleaned = CleanupService.ccu(g).graph
        cfg = ThresholdConfig(fixed_t=3)
        tracker = AuxService.register_history(HistoryTracker(), cleaned, cfg)
        h = AuxService.build_aux(cleaned, tracker)
        index = h.index()
        for c in tracker.registered:
            for d in tracker.registered:
                full_c = (c, (1 << len(c)) - 1)
                full_d = (d, (1 << len(d)) - 1)
                assert h.ul[index[full_c], index[full_d]]

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_color_search(self, seed):
        """Test every aux edge against a search over all color sets"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.BOUNDED_COLOR_CLASS, n=4, p=0.5, t=2, seed=seed))
        g = RefinementService.refine_step(g)
        tracker = HistoryTracker(registered=GraphService.vertex_classes(g))
        h = AuxService.build_aux(g, tracker)
        table = g.colors.tolist()
        for i, (members, mask) in enumerate(h.nodes):
            chosen = [v for k, v in enumerate(members) if mask >> k & 1]
            for j, node in enumerate(h.nodes):
                target = [v for k, v in enumerate(node[0]) if node[1] >> k & 1]
                expected = aux_edge_literal(table, members, chosen, target)
                assert h.ul[i, j] == expected
                assert AuxService.edge_condition(g, members, chosen, target) == expected

    def test_dump_shape(self):
        """Test the JSON dump of an aux graph"""
        dump = stable_block().to_dump()
        assert dump["upper"] == dump["lower"]
        assert [[UPPER, 0], [UPPER, 1]] in dump["edges"]
        assert [[UPPER, 1], [LOWER, 0]] in dump["edges"]
        assert len(dump["edges"]) == 1 + 4


class TestTriangleCompletion:
    """Test cases for triangle completion and stability"""

    def test_edgeless_is_stable(self):
        """Test that an edgeless aux graph is unchanged and stable"""
        h = blank_aux(3)
        assert AuxService.triangle_complete(h) == h
        assert AuxService.is_triangle_stable(h)

    def test_common_lower_neighbor(self):
        """Test that two uppers with a common lower neighbor become adjacent"""
        h = AuxService.add_edge(AuxService.add_edge(blank_aux(3), (UPPER, 0), (LOWER, 2)), (UPPER, 1), (LOWER, 2))
        completed = AuxService.triangle_complete(h)
        assert completed.uu[0, 1] and completed.uu[1, 0]
        assert AuxService.aux_contains(completed, h)

    def test_upper_path_to_lower(self):
        """Test that u1 - u2 - l gains u1 - l and that the path is not stable"""
        h = AuxService.add_edge(AuxService.add_edge(blank_aux(3), (UPPER, 0), (UPPER, 1)), (UPPER, 1), (LOWER, 2))
        assert not AuxService.is_triangle_stable(h)
        completed = AuxService.triangle_complete(h)
        assert completed.ul[0, 2]

    def test_lowers_never_joined(self):
        """Test that two lowers sharing an upper stay non-adjacent and lower-lower edges are refused"""
        h = AuxService.add_edge(AuxService.add_edge(blank_aux(3), (UPPER, 0), (LOWER, 1)), (UPPER, 0), (LOWER, 2))
        completed = AuxService.triangle_complete(h)
        assert completed.ul.sum() == 2
        with pytest.raises(InvalidParametersError):
            AuxService.add_edge(h, (LOWER, 1), (LOWER, 2))

    def test_clique_joined_to_lowers_is_stable(self):
        """Test the structural characterization on a complete block"""
        assert AuxService.is_triangle_stable(stable_block())

    def test_one_extra_edge_settles_quickly(self):
        """Test that one added edge needs at most three changing completions"""
        h = AuxService.add_edge(stable_block(), (UPPER, 2), (LOWER, 0))
        closed, applications = AuxService.triangle_closure(h, limit=3)
        assert 1 <= applications <= 3
        assert AuxService.is_triangle_stable(closed)
        assert closed.uu[0, 2] and closed.ul[2, 1]

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(200))
    def test_random_extra_edge_settles_within_four(self, seed):
        """Test that a random missing edge added to a triangle-stable aux graph settles within four completions"""
        rng = make_rng(seed)
        h = random_stable_aux(rng)
        assert AuxService.is_triangle_stable(h)
        a, b = random_non_edge(h, rng)
        extended = AuxService.add_edge(h, a, b)
        closed, applications = AuxService.triangle_closure(extended, limit=4)
        assert applications <= 4
        assert AuxService.is_triangle_stable(closed)
        assert AuxService.aux_contains(closed, extended)

    @pytest.mark.parametrize("seed", range(12))
    def test_extra_edge_on_derived_stable_graph(self, seed):
        """Test the closure bound starting from the closed aux graph of a cleaned-up graph"""
        rng = make_rng(seed)
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.BOUNDED_COLOR_CLASS, n=8, p=0.5, t=2, seed=seed))
        cleaned = CleanupService.ccu(g).graph
        tracker = AuxService.register_history(HistoryTracker(), cleaned, ThresholdConfig(fixed_t=3))
        closed, _ = AuxService.triangle_closure(AuxService.build_aux(cleaned, tracker))
        edge = random_non_edge(closed, rng)
        if edge is None:
            return
        extended = AuxService.add_edge(closed, *edge)
        _, applications = AuxService.triangle_closure(extended, limit=4)
        assert applications <= 4


class TestRefinementRelations:
    """Aux graphs and potential across one refinement"""

    @pytest.mark.parametrize("seed", range(8))
    def test_singleton_classes_full_inclusion(self, seed):
        """Test that with singleton small classes the completed aux graph survives a step"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.GNP, n=8, p=0.5, seed=seed))
        cleaned = CleanupService.ccu(RefinementService.refine_step(g)).graph
        cfg = ThresholdConfig(fixed_t=2)
        tracker = AuxService.register_history(HistoryTracker(), cleaned, cfg)
        assert all(len(c) == 1 for c in tracker.registered)
        report = AuxService.triangle_inclusion_report(cleaned, tracker)
        assert report.holds
        assert report.missing_upper_upper == 0 and report.missing_upper_lower == 0

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(100))
    def test_full_inclusion_on_cleaned_graphs(self, seed):
        """Test that the completed aux graph of a cleaned-up graph survives a step, history included"""
        rng = make_rng(seed)
        spec = FamilySpec(family=FamilyKind.BOUNDED_COLOR_CLASS, n=6 + seed % 7, p=0.5, t=3, seed=seed)
        g = GeneratorService.generate(spec)
        cfg = ThresholdConfig(fixed_t=3)
        tracker = AuxService.register_history(HistoryTracker(), g, cfg)
        split = GameService.split_random_class(g, rng)
        cleanup = CleanupService.ccu(split)
        for graph in [split] + cleanup.intermediates:
            tracker = AuxService.register_history(tracker, graph, cfg)
        assert CleanupService.is_cleaned_up(cleanup.graph)
        report = AuxService.triangle_inclusion_report(cleanup.graph, tracker)
        assert report.holds
        assert report.missing_upper_upper == 0 and report.missing_upper_lower == 0

    @pytest.mark.parametrize("seed", range(8))
    def test_stable_graph_aux_is_triangle_stable(self, seed):
        """Test that a stabilized graph with singleton small classes has a triangle-stable aux graph"""
        g = GeneratorService.generate(FamilySpec(family=FamilyKind.GNP, n=8, p=0.5, seed=seed))
        stable = RefinementService.stabilize(g).stable_graph
        tracker = AuxService.register_history(HistoryTracker(), stable, ThresholdConfig(fixed_t=2))
        assert AuxService.is_triangle_stable(AuxService.build_aux(stable, tracker))

    def test_refines_small_region(self):
        """Test detection of small vertex class splits"""
        cfg = ThresholdConfig(fixed_t=3)
        before = edgeless(5, [0, 0, 1, 1, 1])
        split_small = edgeless(5, [0, 2, 1, 1, 1])
        split_large = edgeless(5, [0, 0, 1, 1, 2])
        assert AuxService.refines_small_region(before, split_small, cfg)
        assert not AuxService.refines_small_region(before, split_large, cfg)
        assert not AuxService.refines_small_region(before, before, cfg)

    def test_potential_check_not_applicable_without_large_classes(self):
        """Test that the potential check is vacuous when every class is small"""
        g = edgeless(4, [0, 1, 2, 3])
        refined = ColoredGraph.from_table(np.arange(16).reshape(4, 4))
        check = AuxService.large_class_potential_check(g, refined, ThresholdConfig(fixed_t=2))
        assert not check.applicable
        assert check.satisfied
        assert check.delta_f == 16 - AuxService.potential_f(g).f
