import hashlib
import logging
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.exceptions import InputParseError, InvalidParametersError
from app.models.graph import (
    ColorClass, ColoredGraph, PartitionSummary, RefinementOrder,
    ValidationReport, Witness,
)

logger = logging.getLogger(__name__)

# Direction names accepted by neighborhood()
OUT = "out"
IN = "in"


class GraphService:
    """Structural operations on colored complete digraphs"""

    @staticmethod
    def validate(g: ColoredGraph) -> ValidationReport:
        """Check loop/arc color disjointness and converse equivalence.

        Never raises; every violated property gets at least one witness.
        """
        witnesses: List[Witness] = []
        n = g.n
        table = g.colors
        if n == 0:
            return ValidationReport(loop_edge_disjoint=True, converse_equivalent=True)

        diag = np.diagonal(table)
        off_mask = ~np.eye(n, dtype=bool)
        shared = np.intersect1d(np.unique(diag), np.unique(table[off_mask]))
        for color in shared.tolist():
            v = int(np.flatnonzero(diag == color)[0])
            hits = np.argwhere((table == color) & off_mask)[0]
            witnesses.append(Witness(
                kind="loop-edge-overlap",
                pairs=[(v, v), (int(hits[0]), int(hits[1]))],
                colors=[color],
            ))
        loop_edge_disjoint = shared.size == 0

        # converse equivalence <=> color(u,v) determines color(v,u)
        palette = g.palette_size
        joint = (table * palette + table.T).reshape(-1)
        distinct, first = np.unique(joint, return_index=True)
        forward = distinct // palette
        colors, counts = np.unique(forward, return_counts=True)
        for color in colors[counts > 1].tolist():
            rows = np.flatnonzero(forward == color)[:2]
            pairs = [divmod(int(first[r]), n) for r in rows]
            witnesses.append(Witness(
                kind="converse",
                pairs=[(int(u), int(v)) for u, v in pairs],
                colors=[color] + [int(distinct[r] % palette) for r in rows],
            ))
        converse_equivalent = bool(np.all(counts == 1))

        return ValidationReport(
            loop_edge_disjoint=bool(loop_edge_disjoint),
            converse_equivalent=converse_equivalent,
            offending_pairs=witnesses,
        )

    @staticmethod
    def encode_undirected(adjacency, vertex_colors: Optional[Sequence[Hashable]] = None) -> ColoredGraph:
        """Encode a plain undirected graph given as a symmetric 0/1 matrix.

        Loops get one color per vertex label (labels ranked by their string
        form), then one color for adjacent pairs and one for non-adjacent
        pairs.
        """
        adj = np.asarray(adjacency, dtype=bool)
        if adj.size == 0:
            adj = adj.reshape(0, 0)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InputParseError(f"Adjacency must be square, got shape {adj.shape}")
        if np.any(np.diagonal(adj)):
            raise InputParseError("Adjacency must be loop-free")
        if not np.array_equal(adj, adj.T):
            u, v = np.argwhere(adj != adj.T)[0]
            raise InputParseError(f"Adjacency is not symmetric at ({int(u)}, {int(v)})")
        n = adj.shape[0]

        if vertex_colors is None:
            vertex_labels = [""] * n
        else:
            if len(vertex_colors) != n:
                raise InputParseError(f"Expected {n} vertex colors, got {len(vertex_colors)}")
            vertex_labels = [str(c) for c in vertex_colors]
        ranks = {label: i for i, label in enumerate(sorted(set(vertex_labels)))}
        loop_labels = [f"loop:{label}" if label else "loop" for label in sorted(ranks)]

        edge_color = len(ranks)
        non_edge_color = edge_color + 1
        table = np.where(adj, edge_color, non_edge_color).astype(np.int64)
        np.fill_diagonal(table, [ranks[label] for label in vertex_labels] if n else [])
        labels = loop_labels + ["adjacent", "non-adjacent"]
        return ColoredGraph.from_table(table, labels=labels)

    @staticmethod
    def encode_edges(n: int, edges: Iterable[Tuple[int, int]],
                     vertex_colors: Optional[Sequence[Hashable]] = None) -> ColoredGraph:
        """Encode an unordered edge list on vertices 0..n-1"""
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InputParseError(f"Edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InputParseError(f"Self-loop at vertex {u}")
            adj[u, v] = adj[v, u] = True
        return GraphService.encode_undirected(adj, vertex_colors)

    @staticmethod
    def from_networkx(graph: nx.Graph, label_attr: Optional[str] = None) -> ColoredGraph:
        """Encode a networkx graph; nodes are taken in sorted order"""
        nodes = sorted(graph.nodes())
        adj = nx.to_numpy_array(graph, nodelist=nodes, dtype=bool) if nodes else np.zeros((0, 0), bool)
        labels = None
        if label_attr is not None:
            labels = [graph.nodes[v].get(label_attr, "") for v in nodes]
        return GraphService.encode_undirected(adj, labels)

    @staticmethod
    def encode_directed(n: int, arcs: Iterable[Tuple[int, int]]) -> ColoredGraph:
        """Encode a loop-free digraph by the arc pattern of each ordered pair"""
        adj = np.zeros((n, n), dtype=bool)
        for u, v in arcs:
            if not (0 <= u < n and 0 <= v < n):
                raise InputParseError(f"Arc ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InputParseError(f"Self-loop at vertex {u}")
            adj[u, v] = True
        rev = adj.T
        table = np.select(
            [adj & rev, adj & ~rev, ~adj & rev],
            [1, 2, 3],
            default=4,
        ).astype(np.int64)
        np.fill_diagonal(table, 0)
        labels = ["loop", "both", "forward", "backward", "neither"]
        return ColoredGraph.from_table(table, labels=labels)

    @staticmethod
    def compare(a: ColoredGraph, b: ColoredGraph) -> RefinementOrder:
        """Relation of pi(a) to pi(b), ignoring color names"""
        if a.n != b.n:
            raise InvalidParametersError(f"Cannot compare graphs of sizes {a.n} and {b.n}")
        a_count, b_count = a.palette_size, b.palette_size
        joint = np.unique(a.colors * max(b_count, 1) + b.colors).size
        a_finer = joint == a_count
        b_finer = joint == b_count
        if a_finer and b_finer:
            return RefinementOrder.EQUAL
        if a_finer:
            return RefinementOrder.STRICTLY_FINER
        if b_finer:
            return RefinementOrder.STRICTLY_COARSER
        return RefinementOrder.INCOMPARABLE

    @staticmethod
    def is_finer_or_equal(a: ColoredGraph, b: ColoredGraph) -> bool:
        """True if every class of a lies inside a class of b"""
        return GraphService.compare(a, b) in (RefinementOrder.EQUAL, RefinementOrder.STRICTLY_FINER)

    @staticmethod
    def neighborhood(g: ColoredGraph, v: int, colors: Iterable[int], direction: str = OUT) -> FrozenSet[int]:
        if not 0 <= v < g.n:
            raise InvalidParametersError(f"Vertex {v} out of range for n={g.n}")
        wanted = np.fromiter(colors, dtype=np.int64)
        if direction == OUT:
            row = g.colors[v, :]
        elif direction == IN:
            row = g.colors[:, v]
        else:
            raise InvalidParametersError(f"Unknown direction '{direction}'")
        return frozenset(np.flatnonzero(np.isin(row, wanted)).tolist())

    @staticmethod
    def canonical_renumber(g: ColoredGraph) -> ColoredGraph:
        """Renumber colors: loop classes first, then edge classes.

        Within each group classes are ordered by their first member pair in
        row-major order, which is the order of their sorted member lists.
        """
        if g.n == 0:
            return g
        table = g.colors
        palette = g.palette_size
        loop_colors, loop_first = np.unique(np.diagonal(table), return_index=True)
        loop_order = loop_colors[np.argsort(loop_first, kind="stable")]

        is_loop = np.zeros(palette, dtype=bool)
        is_loop[loop_colors] = True
        all_colors, first = np.unique(table.reshape(-1), return_index=True)
        edge_mask = ~is_loop[all_colors]
        edge_order = all_colors[edge_mask][np.argsort(first[edge_mask], kind="stable")]

        order = np.concatenate([loop_order, edge_order])
        mapping = np.empty(palette, dtype=np.int64)
        mapping[order] = np.arange(order.size)
        labels = None
        if g.labels is not None:
            labels = tuple(g.labels[c] for c in order.tolist())
        return ColoredGraph(colors=mapping[table], labels=labels, converse_flag=g.converse_flag)

    @staticmethod
    def partition_summary(g: ColoredGraph) -> PartitionSummary:
        """Materialize pi(chi) as explicit color classes"""
        flat = g.colors.reshape(-1)
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=g.palette_size) if flat.size else np.zeros(0, np.int64)
        loop_set = set(np.diagonal(g.colors).tolist())
        classes: List[ColorClass] = []
        start = 0
        for color, size in enumerate(counts.tolist()):
            members = order[start:start + size]
            start += size
            pairs = [divmod(int(i), g.n) for i in members]
            classes.append(ColorClass(
                color=color,
                size=size,
                is_loop=color in loop_set,
                pairs=[(int(u), int(v)) for u, v in pairs],
            ))
        return PartitionSummary(
            classes=classes,
            vertex_classes=[c for c in classes if c.is_loop],
            edge_classes=[c for c in classes if not c.is_loop],
        )

    @staticmethod
    def vertex_classes(g: ColoredGraph) -> List[Tuple[int, ...]]:
        """Vertex color classes as sorted tuples, ordered by loop color"""
        diag = np.diagonal(g.colors)
        return [tuple(np.flatnonzero(diag == c).tolist()) for c in np.unique(diag).tolist()]

    @staticmethod
    def vertex_class_index(g: ColoredGraph) -> Tuple[np.ndarray, int]:
        """Per-vertex class index (dense, ordered by loop color) and class count"""
        classes, index = np.unique(np.diagonal(g.colors), return_inverse=True)
        return index.reshape(-1).astype(np.int64), int(classes.size)

    @staticmethod
    def converse_map(g: ColoredGraph) -> Optional[Dict[int, int]]:
        """color -> color of the reversed pairs, or None without converse equivalence"""
        palette = g.palette_size
        joint = np.unique((g.colors * palette + g.colors.T).reshape(-1))
        forward, backward = joint // palette, joint % palette
        if np.unique(forward).size != forward.size:
            return None
        return dict(zip(forward.tolist(), backward.tolist()))

    @staticmethod
    def permute(g: ColoredGraph, permutation: Sequence[int]) -> ColoredGraph:
        """Isomorphic copy with vertex u renamed to permutation[u]"""
        perm = np.asarray(permutation, dtype=np.int64)
        if perm.shape != (g.n,) or not np.array_equal(np.sort(perm), np.arange(g.n)):
            raise InvalidParametersError("Not a permutation of the vertex set")
        inverse = np.argsort(perm)
        return ColoredGraph(colors=g.colors[np.ix_(inverse, inverse)], labels=g.labels,
                            converse_flag=g.converse_flag)

    @staticmethod
    def disjoint_union(g: ColoredGraph, h: ColoredGraph) -> ColoredGraph:
        """g and h side by side; all pairs between them get one fresh color.

        Colors are matched by label when both graphs carry labels, otherwise
        by (is-loop, ID) so loop and arc colors stay apart.
        """
        n, m = g.n, h.n
        if g.labels is not None and h.labels is not None:
            names = list(dict.fromkeys(list(g.labels) + list(h.labels)))
            index = {name: i for i, name in enumerate(names)}
            g_keys = np.array([index[name] for name in g.labels], dtype=np.int64)[g.colors]
            h_keys = np.array([index[name] for name in h.labels], dtype=np.int64)[h.colors]
            cross = len(names)
            labels = names + ["cross"]
        else:
            g_keys = GraphService._literal_keys(g)
            h_keys = GraphService._literal_keys(h)
            cross = int(max(g_keys.max(initial=0), h_keys.max(initial=0))) + 1
            labels = None
        table = np.full((n + m, n + m), cross, dtype=np.int64)
        table[:n, :n] = g_keys
        table[n:, n:] = h_keys
        return ColoredGraph.from_table(table, labels=labels)

    @staticmethod
    def _literal_keys(g: ColoredGraph) -> np.ndarray:
        keys = g.colors * 2 + 1
        if g.n:
            np.fill_diagonal(keys, np.diagonal(g.colors) * 2)
        return keys

    @staticmethod
    def class_counts(g: ColoredGraph) -> Tuple[int, int]:
        """(vertex class count, edge class count)"""
        return g.vertex_class_count(), g.edge_class_count()

    @staticmethod
    def graph_hash(g: ColoredGraph) -> str:
        canonical = GraphService.canonical_renumber(g)
        digest = hashlib.sha256()
        digest.update(str(canonical.n).encode())
        digest.update(canonical.colors.astype("<i8").tobytes())
        return digest.hexdigest()
