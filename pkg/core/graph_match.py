#!/usr/bin/env python3
"""
🔍 Graph matching against the knowledge graph

- Subgraph isomorphism (injective, non-induced) via a VF2 matcher that
  compares class labels and edge-property sets
- Deterministic embedding enumeration
- Minimum image-based frequency
- Maximum common subgraph of a pattern and the knowledge graph
- Canonical codes for duplicate detection
"""

import json
import logging
from typing import Dict, Iterator, List, Mapping, Optional, Set, Tuple

import networkx as nx
from networkx.algorithms import isomorphism

from models.knowledge_graph import KnowledgeGraph
from models.pattern import PatternGraph

logger = logging.getLogger(__name__)

Embedding = Dict[str, str]


class TypedGraphMatcher(isomorphism.DiGraphMatcher):
    """VF2 matcher: G1 is the knowledge graph view, G2 the pattern.

    Nodes match on `cls`; every property on a pattern edge must also sit on the
    corresponding KG edge. `pins` fixes pattern nodes to given entities.
    """

    def __init__(self, kg_view: nx.DiGraph, pattern: nx.DiGraph, pins: Optional[Mapping[str, str]] = None):
        super().__init__(kg_view, pattern)
        self.pins = dict(pins or {})

    def semantic_feasibility(self, G1_node, G2_node) -> bool:
        if self.G1.nodes[G1_node]["cls"] != self.G2.nodes[G2_node]["cls"]:
            return False
        pinned = self.pins.get(G2_node)
        if pinned is not None and pinned != G1_node:
            return False
        for succ, attrs in self.G2.succ[G2_node].items():
            if succ == G2_node:
                target = G1_node
            elif succ in self.core_2:
                target = self.core_2[succ]
            else:
                continue
            kg_edge = self.G1.succ[G1_node].get(target)
            if kg_edge is None or not attrs["labels"] <= kg_edge["labels"]:
                return False
        for pred, attrs in self.G2.pred[G2_node].items():
            if pred == G2_node or pred not in self.core_2:
                continue
            kg_edge = self.G1.succ[self.core_2[pred]].get(G1_node)
            if kg_edge is None or not attrs["labels"] <= kg_edge["labels"]:
                return False
        return True


def _ordered_pattern(pattern: PatternGraph, kg: KnowledgeGraph, first: Optional[str] = None) -> nx.DiGraph:
    """Pattern digraph whose insertion order puts the most constrained nodes first.

    The matcher picks the next pattern node by insertion order, so `first`
    (a pinned node) is matched before anything else.
    """
    source = pattern.to_networkx()

    def key(node):
        return (
            node != first,
            len(kg.entities_of_class(pattern.label(node))),
            -source.degree(node),
            node,
        )

    graph = nx.DiGraph()
    for node in sorted(source.nodes, key=key):
        graph.add_node(node, **source.nodes[node])
    graph.add_edges_from(source.edges(data=True))
    return graph


def _matchable(pattern: PatternGraph, kg: KnowledgeGraph) -> bool:
    if not pattern.is_connected():
        return False
    needed: Dict[str, int] = {}
    for _, label in pattern.nodes:
        needed[label] = needed.get(label, 0) + 1
    return all(len(kg.entities_of_class(label)) >= count for label, count in needed.items())


def _iter_embeddings(
    pattern: PatternGraph, kg: KnowledgeGraph, pins: Optional[Mapping[str, str]] = None
) -> Iterator[Embedding]:
    if not _matchable(pattern, kg):
        return
    first = next(iter(pins)) if pins else None
    view = kg.restricted_to_classes(pattern.classes())
    matcher = TypedGraphMatcher(view, _ordered_pattern(pattern, kg, first), pins)
    for mapping in matcher.subgraph_monomorphisms_iter():
        yield {pattern_node: entity for entity, pattern_node in mapping.items()}


def _sort_key(pattern: PatternGraph, embedding: Embedding) -> Tuple[str, ...]:
    return tuple(embedding[node] for node in sorted(pattern.node_ids))


def is_subgraph_isomorphic(pattern: PatternGraph, kg: KnowledgeGraph) -> bool:
    """True iff the (connected, nonempty) pattern has at least one embedding in kg."""
    return next(_iter_embeddings(pattern, kg), None) is not None


def enumerate_embeddings(pattern: PatternGraph, kg: KnowledgeGraph, limit: Optional[int] = None) -> List[Embedding]:
    """All embeddings (or the first `limit`), ordered by the entity tuple over sorted pattern node ids."""
    embeddings = sorted(_iter_embeddings(pattern, kg), key=lambda e: _sort_key(pattern, e))
    return embeddings if limit is None else embeddings[:limit]


def min_image_frequency(pattern: PatternGraph, kg: KnowledgeGraph) -> int:
    """Minimum over pattern nodes of the number of distinct entities the node maps to.

    Each (node, entity) candidate is settled by looking for a single embedding
    pinned there; every embedding found also fills the other nodes' images.
    """
    if not _matchable(pattern, kg):
        return 0
    images: Dict[str, set] = {node: set() for node in pattern.node_ids}
    order = sorted(pattern.node_ids, key=lambda n: (len(kg.entities_of_class(pattern.label(n))), n))
    for node in order:
        for entity in kg.entities_of_class(pattern.label(node)):
            if entity in images[node]:
                continue
            found = next(_iter_embeddings(pattern, kg, {node: entity}), None)
            if found is not None:
                for pattern_node, image in found.items():
                    images[pattern_node].add(image)
        if not images[node]:
            return 0
    return min(len(image) for image in images.values())


def max_common_subgraph(model: PatternGraph, kg: KnowledgeGraph) -> PatternGraph:
    """Largest connected subgraph of `model` that embeds in kg.

    Maximizes node count, then edge count; remaining ties go to the smallest
    canonical code. Returns an empty pattern when no single node matches.
    """
    if is_subgraph_isomorphic(model, kg):
        return model
    search = _CommonSubgraphSearch(model, kg)
    best = search.run()
    if best is None:
        return PatternGraph()
    logger.debug(f"🔍 MCS keeps {len(best)}/{len(model)} nodes, {len(best.edges)} edges "
                 f"({search.checks} embedding checks)")
    return best


class _CommonSubgraphSearch:
    """Branch and bound over connected edge sets that embed.

    Edges that do not embed on their own are dropped first; a component of what
    remains that embeds whole is optimal for that component. Otherwise edge sets
    grow from each seed node (include/exclude branching, earlier seeds banned).
    A set that fails to embed is never extended, and a branch stops once the
    nodes it can still reach cannot beat the best pattern found.
    """

    def __init__(self, model: PatternGraph, kg: KnowledgeGraph):
        self.model = model
        self.kg = kg
        self.checks = 0
        self.best: Optional[Tuple[int, int, str, PatternGraph]] = None
        usable = {n for n in model.node_ids if kg.entities_of_class(model.label(n))}
        self.nodes = sorted(usable)
        self.edges = [
            e for e in model.edges
            if e[0] in usable and e[2] in usable and self._embeds({e[0], e[2]}, [e])
        ]

    def _embeds(self, nodes, edges) -> bool:
        self.checks += 1
        return is_subgraph_isomorphic(self.model.subgraph(nodes, edges), self.kg)

    def _can_reach(self, nodes: int, edges: int) -> bool:
        return self.best is None or (nodes, edges) >= (-self.best[0], -self.best[1])

    def _offer(self, nodes, edges) -> None:
        rank = (-len(nodes), -len(edges))
        if self.best is not None and rank > self.best[:2]:
            return
        pattern = self.model.subgraph(nodes, edges)
        code = canonical_code(pattern)
        if self.best is None or rank + (code,) < self.best[:3]:
            self.best = (rank[0], rank[1], code, pattern)

    def run(self) -> Optional[PatternGraph]:
        graph = nx.Graph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from((e[0], e[2]) for e in self.edges)
        components = []
        for members in nx.connected_components(graph):
            inside = [e for e in self.edges if e[0] in members]
            components.append((sorted(members), inside))
        components.sort(key=lambda c: (-len(c[0]), -len(c[1]), c[0][0]))
        for members, inside in components:
            if not self._can_reach(len(members), len(inside)):
                continue
            if self._embeds(members, inside):
                self._offer(members, inside)
                continue
            for i, seed in enumerate(members):
                self._offer({seed}, [])
                self._grow({seed}, [], set(), set(members[:i]), inside)
        return self.best[3] if self.best is not None else None

    def _grow(self, nodes: Set[str], chosen: List[Tuple[str, str, str]], excluded: Set[Tuple[str, str, str]],
              banned: Set[str], inside: List[Tuple[str, str, str]]) -> None:
        allowed = [e for e in inside if e not in excluded and e[0] not in banned and e[2] not in banned]
        reach = nx.Graph()
        reach.add_nodes_from(nodes)
        reach.add_edges_from((e[0], e[2]) for e in allowed)
        reachable = set(nx.node_connected_component(reach, next(iter(nodes))))
        spare = sum(1 for e in allowed if e[0] in reachable and e not in chosen)
        if not self._can_reach(len(reachable), len(chosen) + spare):
            return
        frontier = next((e for e in allowed if e not in chosen and (e[0] in nodes or e[2] in nodes)), None)
        if frontier is None:
            return
        grown = nodes | {frontier[0], frontier[2]}
        if self._embeds(grown, chosen + [frontier]):
            self._offer(grown, chosen + [frontier])
            self._grow(grown, chosen + [frontier], excluded, banned, inside)
        self._grow(nodes, chosen, excluded | {frontier}, banned, inside)


# ---------------------------------------------------------------------- canonical codes


def _refine(colors: Dict[str, int], out_adj, in_adj) -> Dict[str, int]:
    """Colour refinement on directed, edge-labelled neighbourhoods until stable."""
    while True:
        signatures = {
            node: (
                colors[node],
                tuple(sorted((label, colors[w]) for label, w in out_adj[node])),
                tuple(sorted((label, colors[w]) for label, w in in_adj[node])),
            )
            for node in colors
        }
        ranking = {sig: rank for rank, sig in enumerate(sorted(set(signatures.values())))}
        refined = {node: ranking[sig] for node, sig in signatures.items()}
        if len(set(refined.values())) == len(set(colors.values())):
            return refined
        colors = refined


def canonical_code(pattern: PatternGraph) -> str:
    """Isomorphism-invariant string for a labelled directed (multi-label) graph.

    Individualization-refinement: refine colours, branch on every node of the
    first non-singleton cell, keep the lexicographically smallest encoding.
    """
    labels = dict(pattern.nodes)
    out_adj = {n: [] for n in labels}
    in_adj = {n: [] for n in labels}
    for src, prop, dst in pattern.edges:
        out_adj[src].append((prop, dst))
        in_adj[dst].append((prop, src))
    label_rank = {label: i for i, label in enumerate(sorted(set(labels.values())))}
    best: List[Optional[tuple]] = [None]

    def encode(colors: Dict[str, int]) -> tuple:
        order = sorted(labels, key=colors.__getitem__)
        position = {node: i for i, node in enumerate(order)}
        return (
            tuple(labels[n] for n in order),
            tuple(sorted((position[s], p, position[d]) for s, p, d in pattern.edges)),
        )

    def search(colors: Dict[str, int]) -> None:
        colors = _refine(colors, out_adj, in_adj)
        cells: Dict[int, List[str]] = {}
        for node, color in colors.items():
            cells.setdefault(color, []).append(node)
        split = next((color for color in sorted(cells) if len(cells[color]) > 1), None)
        if split is None:
            code = encode(colors)
            if best[0] is None or code < best[0]:
                best[0] = code
            return
        for node in sorted(cells[split]):
            individualized = {n: 2 * c + 1 for n, c in colors.items()}
            individualized[node] = 2 * colors[node]
            search(individualized)

    if labels:
        search({n: label_rank[label] for n, label in labels.items()})
        node_labels, edges = best[0]
    else:
        node_labels, edges = (), ()
    return json.dumps([list(node_labels), [list(e) for e in edges]], separators=(",", ":"), ensure_ascii=False)
