"""
Unit tests for colored graphs and graph service
Run with: pytest app/test/test_graph_service.py
"""
import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from pydantic import ValidationError

from app.exceptions import InputParseError, InvalidParametersError
from app.models.graph import ColoredGraph, RefinementOrder
from app.services.generator_service import GeneratorService
from app.services.graph_service import IN, OUT, GraphService
from app.services.refinement_service import RefinementService
from app.test.strategies import PROPERTY_SETTINGS, undirected_graphs


def path(n: int) -> ColoredGraph:
    return GraphService.from_networkx(nx.path_graph(n))


class TestColoredGraph:
    """Test cases for the ColoredGraph model"""

    def test_rejects_non_square_table(self):
        """Test that a non-square table is rejected"""
        with pytest.raises(ValidationError):
            ColoredGraph(colors=[[0, 1, 1], [1, 0, 1]])

    def test_rejects_sparse_ids(self):
        """Test that color IDs must be dense"""
        with pytest.raises(ValidationError):
            ColoredGraph(colors=[[0, 2], [2, 0]])

    def test_from_table_densifies(self):
        """Test that from_table renumbers arbitrary IDs keeping their order"""
        g = ColoredGraph.from_table([[5, 9], [9, 5]])
        assert g.colors.tolist() == [[0, 1], [1, 0]]
        assert g.palette_size == 2

    def test_table_is_read_only(self):
        """Test that the stored table cannot be mutated"""
        g = path(3)
        with pytest.raises(ValueError):
            g.colors[0, 0] = 7

    def test_empty_and_single_vertex(self):
        """Test the degenerate sizes"""
        empty = ColoredGraph.from_table(np.zeros((0, 0), dtype=np.int64))
        single = ColoredGraph.from_table([[0]])
        assert empty.n == 0 and empty.palette_size == 0
        assert single.n == 1 and single.is_discrete()

    def test_class_counts(self):
        """Test vertex and edge class counts on the path P3"""
        g = path(3)
        assert g.vertex_class_count() == 1
        assert g.edge_class_count() == 2
        assert GraphService.class_counts(g) == (1, 2)


class TestEncoding:
    """Test cases for graph encoders"""

    def test_encode_undirected_labels(self):
        """Test loop, adjacent and non-adjacent colors of an encoding"""
        g = path(3)
        assert g.labels == ("loop", "adjacent", "non-adjacent")
        assert g.colors.tolist() == [[0, 1, 2], [1, 0, 1], [2, 1, 0]]

    def test_vertex_colored_k4_has_three_colors(self):
        """Test K4 with vertex colors {a,a,b,b}"""
        adjacency = np.ones((4, 4), dtype=bool) & ~np.eye(4, dtype=bool)
        g = GraphService.encode_undirected(adjacency, ["a", "a", "b", "b"])
        assert g.palette_size == 3
        assert g.vertex_class_count() == 2

    def test_asymmetric_adjacency_rejected(self):
        """Test that a non-symmetric adjacency raises an input error"""
        adjacency = np.zeros((3, 3), dtype=bool)
        adjacency[0, 1] = True
        with pytest.raises(InputParseError):
            GraphService.encode_undirected(adjacency)

    def test_self_loop_rejected(self):
        """Test that edge lists with self-loops are rejected"""
        with pytest.raises(InputParseError):
            GraphService.encode_edges(3, [(1, 1)])

    def test_edge_out_of_range(self):
        """Test that edges beyond n are rejected"""
        with pytest.raises(InputParseError):
            GraphService.encode_edges(3, [(0, 3)])

    def test_encode_directed_patterns(self):
        """Test the arc pattern colors of a directed 2-path"""
        g = GraphService.encode_directed(3, [(0, 1), (1, 2), (2, 1)])
        names = [[g.labels[c] for c in row] for row in g.colors.tolist()]
        assert names[0][1] == "forward"
        assert names[1][0] == "backward"
        assert names[1][2] == "both"
        assert names[0][2] == "neither"
        assert GraphService.validate(g).ok

    def test_from_networkx_label_attribute(self):
        """Test that a node attribute becomes the vertex color"""
        graph = nx.path_graph(3)
        nx.set_node_attributes(graph, {0: "x", 1: "y", 2: "x"}, "kind")
        g = GraphService.from_networkx(graph, label_attr="kind")
        assert GraphService.vertex_classes(g) == [(0, 2), (1,)]


class TestValidate:
    """Test cases for structural validation"""

    def test_encoded_graph_is_valid(self):
        """Test that encoder output passes validation"""
        report = GraphService.validate(path(5))
        assert report.ok
        assert report.loop_edge_disjoint and report.converse_equivalent

    def test_loop_edge_overlap(self):
        """Test that a color used on a loop and an arc is reported"""
        g = ColoredGraph.from_table([[0, 0], [1, 0]])
        report = GraphService.validate(g)
        assert not report.loop_edge_disjoint
        assert any(w.kind == "loop-edge-overlap" for w in report.offending_pairs)

    def test_converse_violation_witnessed(self):
        """Test that the two-layer construction is not converse-equivalent"""
        g = GeneratorService.appendix_a(3)
        report = GraphService.validate(g)
        assert report.loop_edge_disjoint
        assert not report.converse_equivalent
        witness = next(w for w in report.offending_pairs if w.kind == "converse")
        (u1, v1), (u2, v2) = witness.pairs
        assert g.colors[u1, v1] == g.colors[u2, v2]
        assert g.colors[v1, u1] != g.colors[v2, u2]

    def test_converse_map(self):
        """Test the converse map of an undirected and a directed encoding"""
        undirected = path(3)
        assert GraphService.converse_map(undirected) == {0: 0, 1: 1, 2: 2}
        directed = GraphService.encode_directed(2, [(0, 1)])
        mapping = GraphService.converse_map(directed)
        forward = int(directed.colors[0, 1])
        backward = int(directed.colors[1, 0])
        assert mapping[forward] == backward and mapping[backward] == forward
        assert GraphService.converse_map(GeneratorService.appendix_a(3)) is None


class TestCompare:
    """Test cases for partition comparison"""

    def test_equal_to_itself(self):
        """Test that a graph is Equal to itself"""
        assert GraphService.compare(path(4), path(4)) is RefinementOrder.EQUAL

    def test_refinement_is_strictly_finer(self):
        """Test that one refinement step of P4 is strictly finer"""
        g = path(4)
        refined = RefinementService.refine_step(g)
        assert GraphService.compare(refined, g) is RefinementOrder.STRICTLY_FINER
        assert GraphService.compare(g, refined) is RefinementOrder.STRICTLY_COARSER

    def test_incomparable(self):
        """Test two partitions that split different vertices off"""
        a = ColoredGraph.from_table([[0, 2, 2], [2, 0, 2], [2, 2, 1]])
        b = ColoredGraph.from_table([[0, 2, 2], [2, 1, 2], [2, 2, 1]])
        assert GraphService.compare(a, b) is RefinementOrder.INCOMPARABLE

    def test_ignores_color_names(self):
        """Test that renaming colors does not change the relation"""
        g = path(4)
        renamed = ColoredGraph.from_table(g.palette_size - 1 - g.colors)
        assert GraphService.compare(g, renamed) is RefinementOrder.EQUAL

    def test_size_mismatch(self):
        """Test that graphs of different sizes cannot be compared"""
        with pytest.raises(InvalidParametersError):
            GraphService.compare(path(3), path(4))


class TestStructure:
    """Test cases for neighborhoods, renumbering and unions"""

    def test_neighborhood(self):
        """Test the out- and in-neighborhood of the middle of P3"""
        g = path(3)
        adjacent = g.labels.index("adjacent")
        assert GraphService.neighborhood(g, 1, [adjacent]) == frozenset({0, 2})
        assert GraphService.neighborhood(g, 0, [adjacent], direction=IN) == frozenset({1})
        with pytest.raises(InvalidParametersError):
            GraphService.neighborhood(g, 5, [adjacent], direction=OUT)

    @PROPERTY_SETTINGS
    @given(undirected_graphs())
    def test_canonical_renumber_preserves_partition(self, g):
        """Test that renumbering keeps the partition and puts loops first"""
        canonical = GraphService.canonical_renumber(g)
        assert GraphService.compare(g, canonical) is RefinementOrder.EQUAL
        assert np.diagonal(canonical.colors).max() < canonical.vertex_class_count()
        assert GraphService.canonical_renumber(canonical) == canonical

    def test_permute(self):
        """Test that permute moves pair (u, v) to (perm[u], perm[v])"""
        g = GraphService.encode_directed(3, [(0, 1), (1, 2)])
        perm = [2, 0, 1]
        permuted = GraphService.permute(g, perm)
        for u in range(3):
            for v in range(3):
                assert permuted.colors[perm[u], perm[v]] == g.colors[u, v]
        with pytest.raises(InvalidParametersError):
            GraphService.permute(g, [0, 0, 1])

    def test_disjoint_union_by_label(self):
        """Test that labelled graphs share colors and get one cross color"""
        union = GraphService.disjoint_union(path(3), path(3))
        assert union.n == 6
        assert union.palette_size == 4
        assert union.labels[int(union.colors[0, 3])] == "cross"
        assert GraphService.validate(union).ok

    def test_disjoint_union_literal(self):
        """Test that unlabelled graphs keep loop and arc colors apart"""
        g = ColoredGraph.from_table([[0, 1], [1, 0]])
        union = GraphService.disjoint_union(g, g)
        assert GraphService.validate(union).loop_edge_disjoint
        assert union.palette_size == 3

    def test_partition_summary(self):
        """Test that summary classes cover every pair once"""
        summary = GraphService.partition_summary(path(4))
        assert sum(c.size for c in summary.classes) == 16
        assert len(summary.vertex_classes) == 1
        assert summary.vertex_classes[0].pairs == [(0, 0), (1, 1), (2, 2), (3, 3)]

    def test_graph_hash_is_name_independent(self):
        """Test that the hash ignores color names but not structure"""
        g = path(4)
        renamed = ColoredGraph.from_table(g.palette_size - 1 - g.colors)
        assert GraphService.graph_hash(g) == GraphService.graph_hash(renamed)
        assert GraphService.graph_hash(g) != GraphService.graph_hash(path(5))
