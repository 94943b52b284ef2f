import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import networkx as nx
from pydantic import ValidationError

from app.exceptions import InputParseError, WLError
from app.models.graph import ColoredGraph
from app.models.schemas import ColoredGraphDocument
from app.services.graph_service import GraphService

logger = logging.getLogger(__name__)


def _read_text(source: str) -> str:
    """File contents when source names an existing file, else the string itself"""
    path = Path(source)
    try:
        if path.is_file():
            return path.read_text()
    except OSError:
        pass
    return source


class IOService:
    """Graph ingestion and emission"""

    @staticmethod
    def read_graph6(source: str) -> ColoredGraph:
        """First graph of a graph6 file or string"""
        try:
            text = _read_text(source)
            lines = [line.strip() for line in text.splitlines() if line.strip()]
            if not lines:
                raise InputParseError("Empty graph6 input")
            line = lines[0]
            if line.startswith(">>graph6<<"):
                line = line[len(">>graph6<<"):]
            graph = nx.from_graph6_bytes(line.encode("ascii"))
            return GraphService.from_networkx(graph)
        except WLError:
            raise
        except Exception as e:
            raise InputParseError(f"Invalid graph6 input: {str(e)}")

    @staticmethod
    def parse_edge_list(text: str) -> Tuple[int, List[Tuple[int, int]], Optional[List[str]]]:
        """Edge-list grammar.

        ``u v`` or ``e u v``: edge (0-based); ``n v label``: vertex label;
        ``p edge n m``: fixes n; ``c ...`` / ``# ...``: comment.
        """
        declared_n = None
        edges: List[Tuple[int, int]] = []
        labels: Dict[int, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            parts = raw.split()
            if not parts or parts[0] in ("c", "#") or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "p":
                    declared_n = int(parts[2])
                elif parts[0] == "n":
                    labels[int(parts[1])] = parts[2]
                elif parts[0] == "e":
                    edges.append((int(parts[1]), int(parts[2])))
                elif len(parts) == 2:
                    edges.append((int(parts[0]), int(parts[1])))
                else:
                    raise ValueError(f"unrecognized line '{raw.strip()}'")
            except (ValueError, IndexError) as e:
                raise InputParseError(f"Edge list line {lineno}: {str(e)}")
        vertices = [v for edge in edges for v in edge] + list(labels)
        if any(v < 0 for v in vertices):
            raise InputParseError("Vertex IDs must be non-negative")
        n = declared_n if declared_n is not None else (max(vertices) + 1 if vertices else 0)
        vertex_labels = [labels.get(v, "") for v in range(n)] if labels else None
        return n, edges, vertex_labels

    @staticmethod
    def read_edge_list(source: str) -> ColoredGraph:
        n, edges, labels = IOService.parse_edge_list(_read_text(source))
        return GraphService.encode_edges(n, edges, labels)

    @staticmethod
    def read_json(source: str) -> ColoredGraph:
        """Colored-graph document {"n", "colors" (row-major), optional "labels"}"""
        try:
            document = ColoredGraphDocument.model_validate_json(_read_text(source))
        except ValidationError as e:
            raise InputParseError(f"Invalid colored-graph document: {str(e)}")
        table = [document.colors[i * document.n:(i + 1) * document.n] for i in range(document.n)]
        labels = document.labels
        if labels is not None and document.colors and len(labels) <= max(document.colors):
            raise InputParseError("Labels must name every color ID in use")
        try:
            return ColoredGraph.from_table(table, labels=labels)
        except ValidationError as e:
            raise InputParseError(f"Invalid colored-graph document: {str(e)}")

    @staticmethod
    def to_document(g: ColoredGraph) -> ColoredGraphDocument:
        canonical = GraphService.canonical_renumber(g)
        return ColoredGraphDocument(
            n=canonical.n,
            colors=canonical.colors.reshape(-1).tolist(),
            labels=list(canonical.labels) if canonical.labels is not None else None,
        )

    @staticmethod
    def write_json(g: ColoredGraph) -> str:
        return IOService.to_document(g).model_dump_json(exclude_none=True)

    @staticmethod
    def load_input(graph6: Optional[str] = None, edges: Optional[str] = None,
                   json_source: Optional[str] = None) -> Optional[ColoredGraph]:
        """Dispatch on whichever input flag is set"""
        if graph6 is not None:
            return IOService.read_graph6(graph6)
        if edges is not None:
            return IOService.read_edge_list(edges)
        if json_source is not None:
            return IOService.read_json(json_source)
        return None

    @staticmethod
    def dumps(data: object) -> str:
        return json.dumps(data, sort_keys=True)
