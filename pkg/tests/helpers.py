"""Shared builders for test corpora and graphs."""

from mmart.corpus import Corpus, Painting
from mmart.knowledge_graph import KnowledgeGraph


def painting(
    pid: str,
    split: str = "train",
    title: str = "untitled",
    comment: str = "",
    author: str = "anon",
    technique: str = "oil",
    date: str = "1600",
    art_type: str = "portrait",
    school: str = "dutch",
    timeframe: str = "1601-1650",
) -> Painting:
    return Painting(
        id=pid,
        title=title,
        comment=comment,
        author=author,
        technique=technique,
        date=date,
        art_type=art_type,
        school=school,
        timeframe=timeframe,
        split=split,
    )


def corpus_of(*paintings: Painting) -> Corpus:
    return Corpus(paintings)


def graph_of(*edges: tuple[str, str]) -> KnowledgeGraph:
    return KnowledgeGraph.from_edges(edges)


def clique_bridge_graph(cliques: int = 3, size: int = 10) -> KnowledgeGraph:
    """Disjoint complete graphs chained by single bridge edges."""
    edges = []
    for c in range(cliques):
        names = [f"c{c}n{i:02d}" for i in range(size)]
        edges += [(a, b) for i, a in enumerate(names) for b in names[i + 1 :]]
        if c + 1 < cliques:
            edges.append((f"c{c}n00", f"c{c + 1}n01"))
    return KnowledgeGraph.from_edges(edges)
