#!/usr/bin/env python3
"""
🧩 Pattern graphs

Class-level view of a semantic model (data nodes dropped) used for every
matching operation against the knowledge graph.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Tuple

import networkx as nx


@dataclass(frozen=True)
class PatternGraph:
    """Labelled directed graph: nodes are (id, label), edges (src, property, dst)."""
    nodes: Tuple[Tuple[str, str], ...] = ()
    edges: Tuple[Tuple[str, str, str], ...] = ()
    _labels: Dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        nodes = tuple(sorted(set(tuple(n) for n in self.nodes)))
        edges = tuple(sorted(set(tuple(e) for e in self.edges)))
        labels = dict(nodes)
        if len(labels) != len(nodes):
            raise ValueError("pattern node ids must be unique")
        for src, _, dst in edges:
            if src not in labels or dst not in labels:
                raise ValueError(f"pattern edge endpoint missing: {src} -> {dst}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_labels", labels)

    @classmethod
    def from_parts(cls, nodes: Iterable[Tuple[str, str]], edges: Iterable[Tuple[str, str, str]]) -> "PatternGraph":
        return cls(tuple(nodes), tuple(edges))

    @property
    def node_ids(self) -> List[str]:
        return [n for n, _ in self.nodes]

    def label(self, node_id: str) -> str:
        return self._labels[node_id]

    def classes(self) -> FrozenSet[str]:
        return frozenset(self._labels.values())

    def __len__(self) -> int:
        return len(self.nodes)

    def is_empty(self) -> bool:
        return not self.nodes

    def to_networkx(self) -> nx.DiGraph:
        """DiGraph with node attribute `cls` and edge attribute `labels` (a frozenset)."""
        graph = nx.DiGraph()
        for node_id, label in self.nodes:
            graph.add_node(node_id, cls=label)
        for src, prop, dst in self.edges:
            if graph.has_edge(src, dst):
                graph[src][dst]["labels"] = graph[src][dst]["labels"] | {prop}
            else:
                graph.add_edge(src, dst, labels=frozenset({prop}))
        return graph

    def is_connected(self) -> bool:
        """Weak connectivity; an empty pattern is not connected."""
        if not self.nodes:
            return False
        return nx.is_weakly_connected(self.to_networkx())

    def subgraph(self, node_ids: Iterable[str], edges: Iterable[Tuple[str, str, str]] = None) -> "PatternGraph":
        keep = set(node_ids)
        if edges is None:
            edges = [e for e in self.edges if e[0] in keep and e[2] in keep]
        return PatternGraph(tuple((n, self._labels[n]) for n in keep), tuple(edges))

    def with_edge(self, src: str, prop: str, dst: str, new_node: Tuple[str, str] = None) -> "PatternGraph":
        nodes = self.nodes + ((new_node,) if new_node else ())
        return PatternGraph(nodes, self.edges + ((src, prop, dst),))
