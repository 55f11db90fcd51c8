"""Game-graph interchange parsing and triplet extraction.

A game graph arrives as one JSON document per game:

    {"game_id": str,
     "nodes": [{"id": str, "text": str}, ...],
     "edges": [{"source": str, "action": str, "target": str}, ...]}

Parsing is lossless: self-loops, parallel edges, and empty node texts are
all accepted here and dealt with downstream. Every edge becomes one
triplet ``(prefix, action, postfix)`` annotated with the out-degree of its
source node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from .errors import GraphFormatError


@dataclass(frozen=True)
class StoryNode:
    id: str
    text: str


@dataclass(frozen=True)
class ChoiceEdge:
    source: str
    action: str
    target: str


@dataclass(frozen=True)
class GameGraph:
    game_id: str
    nodes: tuple[StoryNode, ...]
    edges: tuple[ChoiceEdge, ...]

    def node_by_id(self, node_id: str) -> StoryNode:
        return {n.id: n for n in self.nodes}[node_id]


@dataclass(frozen=True)
class Triplet:
    game_id: str
    prefix: str
    action: str
    postfix: str
    source_out_degree: int


def _require(value, types, where: str):
    if not isinstance(value, types):
        raise GraphFormatError(f"{where}: expected {types if isinstance(types, type) else 'one of ' + str(types)}, got {type(value).__name__}")
    return value


def parse_graph(document: bytes | str, game_id: str = "") -> GameGraph:
    """Parse one interchange document into a validated :class:`GameGraph`.

    ``game_id`` is a fallback (typically derived from the file name) used
    when the document carries no ``game_id`` of its own.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            raise GraphFormatError(f"document is not valid UTF-8: {e}") from e
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"document is not valid JSON: {e}") from e

    _require(obj, dict, "document root")
    doc_game_id = obj.get("game_id", "")
    _require(doc_game_id, str, "game_id")
    resolved_id = doc_game_id or game_id
    if not resolved_id:
        raise GraphFormatError("document has no game_id and no fallback was given")

    nodes: list[StoryNode] = []
    seen: set[str] = set()
    for i, raw in enumerate(_require(obj.get("nodes", []), list, "nodes")):
        _require(raw, dict, f"nodes[{i}]")
        node_id = _require(raw.get("id"), str, f"nodes[{i}].id")
        if not node_id:
            raise GraphFormatError(f"nodes[{i}].id is empty")
        if node_id in seen:
            raise GraphFormatError(f"nodes[{i}]: duplicate node id {node_id!r}")
        seen.add(node_id)
        text = _require(raw.get("text", ""), str, f"nodes[{i}].text")
        nodes.append(StoryNode(id=node_id, text=text))

    edges: list[ChoiceEdge] = []
    for i, raw in enumerate(_require(obj.get("edges", []), list, "edges")):
        _require(raw, dict, f"edges[{i}]")
        source = _require(raw.get("source"), str, f"edges[{i}].source")
        action = _require(raw.get("action", ""), str, f"edges[{i}].action")
        target = _require(raw.get("target"), str, f"edges[{i}].target")
        if source not in seen:
            raise GraphFormatError(f"edges[{i}]: source references missing node {source!r}")
        if target not in seen:
            raise GraphFormatError(f"edges[{i}]: target references missing node {target!r}")
        edges.append(ChoiceEdge(source=source, action=action, target=target))

    return GameGraph(game_id=resolved_id, nodes=tuple(nodes), edges=tuple(edges))


def serialize_graph(graph: GameGraph) -> str:
    """Serialize a graph back to the interchange format (UTF-8, no BOM)."""
    obj = {
        "game_id": graph.game_id,
        "nodes": [{"id": n.id, "text": n.text} for n in graph.nodes],
        "edges": [{"source": e.source, "action": e.action, "target": e.target} for e in graph.edges],
    }
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def extract_triplets(graph: GameGraph) -> list[Triplet]:
    """One triplet per edge, in edge order, each annotated with the
    out-degree of its source node."""
    texts = {n.id: n.text for n in graph.nodes}
    out_degree: dict[str, int] = {}
    for e in graph.edges:
        out_degree[e.source] = out_degree.get(e.source, 0) + 1
    return [
        Triplet(
            game_id=graph.game_id,
            prefix=texts[e.source],
            action=e.action,
            postfix=texts[e.target],
            source_out_degree=out_degree[e.source],
        )
        for e in graph.edges
    ]


# Importers turn source-specific game formats into interchange graphs.
# The built-in "interchange" importer is the identity parse; projects with
# other corpora register their own converter here.
Importer = Callable[[bytes, str], GameGraph]

IMPORTERS: dict[str, Importer] = {
    "interchange": parse_graph,
}
