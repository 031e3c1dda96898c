"""The artistic knowledge graph: train paintings linked to their attribute values.

Nodes are namespaced ids ("painting:<id>", "<attribute>:<value>"); the graph
is undirected, unweighted, and bipartite between painting nodes and
attribute-value nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import ATTRIBUTES, Corpus
from .errors import DataError

_FIELD_BY_ATTRIBUTE = {
    "type": "art_type",
    "school": "school",
    "timeframe": "timeframe",
    "author": "author",
}

DEFAULT_GRAPH_ATTRIBUTES = ATTRIBUTES


def painting_node(painting_id: str) -> str:
    return f"painting:{painting_id}"


def attribute_node(attribute: str, value: str) -> str:
    return f"{attribute}:{value}"


@dataclass(frozen=True)
class KnowledgeGraph:
    """Undirected unweighted graph with lexicographically ordered nodes."""

    nodes: tuple[str, ...]
    adjacency: dict[str, tuple[str, ...]]
    node_index: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_index", {n: i for i, n in enumerate(self.nodes)})

    @classmethod
    def from_edges(
        cls, edges: Iterable[tuple[str, str]], extra_nodes: Iterable[str] = ()
    ) -> "KnowledgeGraph":
        neighbors: dict[str, set[str]] = {n: set() for n in extra_nodes}
        for a, b in edges:
            if a == b:
                raise DataError(f"self-loop on node {a!r}")
            neighbors.setdefault(a, set()).add(b)
            neighbors.setdefault(b, set()).add(a)
        nodes = tuple(sorted(neighbors))
        adjacency = {n: tuple(sorted(neighbors[n])) for n in nodes}
        return cls(nodes, adjacency)

    def degree(self, node: str) -> int:
        return len(self.adjacency[node])

    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency.values()) // 2

    def edges(self) -> list[tuple[str, str]]:
        """Each undirected edge once, as (smaller, larger), sorted."""
        return [(a, b) for a in self.nodes for b in self.adjacency[a] if a < b]


def build_graph(
    corpus: Corpus, attributes: Iterable[str] = DEFAULT_GRAPH_ATTRIBUTES
) -> KnowledgeGraph:
    """One node per train painting, one per distinct (attribute, value) pair.

    Every painting is linked to the value node of each of its fields in
    ``attributes``; UNKNOWN-sentinel values are ordinary nodes.
    """
    attrs = tuple(attributes)
    if not attrs:
        raise ValueError("empty attribute set")
    for a in attrs:
        if a not in ATTRIBUTES:
            raise ValueError(f"unknown attribute {a!r}")
    train = corpus.split("train")
    if not train:
        raise DataError("empty train split")
    edges = []
    for p in train:
        for a in attrs:
            edges.append((painting_node(p.id), attribute_node(a, getattr(p, _FIELD_BY_ATTRIBUTE[a]))))
    return KnowledgeGraph.from_edges(edges)


def save_edge_list(graph: KnowledgeGraph, path: str | Path) -> None:
    lines = [f"{a}\t{b}" for a, b in graph.edges()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_edge_list(path: str | Path) -> KnowledgeGraph:
    edges = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line:
            continue
        a, sep, b = line.partition("\t")
        if not sep or not a or not b:
            raise DataError(f"{path}: malformed edge on line {lineno}")
        edges.append((a, b))
    return KnowledgeGraph.from_edges(edges)
