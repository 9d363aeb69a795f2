#!/usr/bin/env python3
"""
🌳 Seed models from Steiner trees

Attachment choices are enumerated best-first (cheapest combination of one
candidate edge per attribute first); the class nodes they touch are joined
with networkx's metric-closure Steiner approximation on an undirected view of
the alignment graph. The cheapest distinct trees become candidate models.

Attachments are first restricted to the slots the known models use, so that
columns of one class keep the nodes they had in the known models.
"""

import heapq
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.algorithms.approximation import steiner_tree

from core.alignment import AlignmentEdge, AlignmentGraph, AttachmentEdge
from core.errors import SteinerError
from core.graph_match import canonical_code
from models.semantic_model import DATA, OBJECT, ClassNode, DataNode, Edge, SemanticModel, data_node_id

logger = logging.getLogger(__name__)

DEFAULT_K = 10
MAX_ASSIGNMENTS = 256


@dataclass(frozen=True)
class CandidateModel:
    model: SemanticModel
    total_weight: float
    rank: int
    code: str = ""


def _undirected_view(ag: AlignmentGraph) -> nx.Graph:
    """Cheapest directed edge per node pair, kept on the undirected edge as `edge`."""
    view = nx.Graph()
    view.add_nodes_from(sorted(ag.node_ids()))
    for edge in sorted(ag.edges, key=lambda e: (e.weight, e.src, e.label, e.dst)):
        if not view.has_edge(edge.src, edge.dst):
            view.add_edge(edge.src, edge.dst, weight=edge.weight, edge=edge)
    return view


def _assignments(options: List[List[AttachmentEdge]], budget: int) -> Iterator[Tuple[AttachmentEdge, ...]]:
    """Assignments in ascending total attachment weight; no (node, property) slot used twice."""
    start = tuple(0 for _ in options)
    heap = [(sum(o[0].weight for o in options), start)]
    seen = {start}
    popped = 0
    while heap and popped < budget:
        _, indices = heapq.heappop(heap)
        popped += 1
        chosen = tuple(options[i][j] for i, j in enumerate(indices))
        slots = {(a.src, a.property) for a in chosen}
        if len(slots) == len(chosen):
            yield chosen
        for i in range(len(options)):
            if indices[i] + 1 < len(options[i]):
                successor = indices[:i] + (indices[i] + 1,) + indices[i + 1:]
                if successor not in seen:
                    seen.add(successor)
                    weight = sum(options[p][q].weight for p, q in enumerate(successor))
                    heapq.heappush(heap, (weight, successor))


def _connect(view: nx.Graph, terminals: Set[str]) -> Tuple[List[AlignmentEdge], float]:
    if len(terminals) == 1:
        return [], 0.0
    tree = steiner_tree(view, sorted(terminals), weight="weight", method="kou")
    edges = [data["edge"] for _, _, data in tree.edges(data=True)]
    return edges, sum(e.weight for e in edges)


def _to_model(ag: AlignmentGraph, class_ids: Set[str], edges: Sequence[AlignmentEdge],
              chosen: Sequence[AttachmentEdge]) -> SemanticModel:
    nodes = []
    for node_id in sorted(class_ids):
        node = ag.node(node_id)
        nodes.append(ClassNode(node.id, node.label, node.index))
    data_nodes = [DataNode(data_node_id(a.attribute), a.attribute) for a in chosen]
    model_edges = [Edge(e.src, e.label, e.dst, OBJECT) for e in edges]
    model_edges += [Edge(a.src, a.property, data_node_id(a.attribute), DATA) for a in chosen]
    return SemanticModel(tuple(nodes), tuple(data_nodes), tuple(model_edges)).renumbered()


def _search(ag: AlignmentGraph, view: nx.Graph, terminals: Sequence[str], options_of,
            max_assignments: int) -> Tuple[Dict[str, CandidateModel], List[str]]:
    """Distinct candidate models per canonical code, plus the attributes left unplaced otherwise."""
    components = sorted((sorted(c) for c in nx.connected_components(view)), key=lambda c: c[0])
    found: Dict[str, CandidateModel] = {}
    best_partial: Tuple[int, List[str]] = (-1, [])
    for component in components:
        members = set(component)
        options = [[a for a in options_of(t) if a.src in members] for t in terminals]
        covered = [t for t, o in zip(terminals, options) if o]
        if len(covered) < len(terminals):
            if len(covered) > best_partial[0]:
                best_partial = (len(covered), [t for t in terminals if t not in covered])
            continue
        subview = view.subgraph(component)
        for chosen in _assignments(options, max_assignments):
            class_ids = {a.src for a in chosen}
            edges, tree_weight = _connect(subview, class_ids)
            class_ids |= {e.src for e in edges} | {e.dst for e in edges}
            model = _to_model(ag, class_ids, edges, chosen)
            total = sum(a.weight for a in chosen) + tree_weight
            code = canonical_code(model.to_pattern(include_data=True))
            if code not in found or total < found[code].total_weight:
                found[code] = CandidateModel(model, total, 0, code)
    return found, best_partial[1]


def top_k_steiner_trees(ag: AlignmentGraph, terminals: Optional[Sequence[str]] = None, k: int = DEFAULT_K,
                        max_assignments: int = MAX_ASSIGNMENTS) -> List[CandidateModel]:
    """Up to k distinct candidate models covering every terminal attribute, cheapest first.

    Attachments that follow the known layout are tried first; every attachment
    is allowed only when that search places nothing.
    """
    if k < 1:
        raise SteinerError(f"k must be >= 1, got {k}")
    terminals = sorted(terminals) if terminals is not None else ag.attributes()
    if not terminals:
        raise SteinerError("no terminal attributes")
    for attribute in terminals:
        if not ag.attachments_of(attribute):
            raise SteinerError(f"attribute '{attribute}' has no candidate class node", [attribute])

    view = _undirected_view(ag)
    found, missing = _search(ag, view, terminals, ag.preferred_attachments_of, max_assignments)
    if not found:
        logger.debug("🌳 No tree follows the known layout, trying every attachment")
        found, missing = _search(ag, view, terminals, ag.attachments_of, max_assignments)
    if not found:
        raise SteinerError(f"attributes cannot be connected to the rest: {', '.join(missing)}", missing)

    ranked = sorted(found.values(), key=lambda c: (c.total_weight, c.code))[:k]
    result = [CandidateModel(c.model, c.total_weight, rank, c.code) for rank, c in enumerate(ranked, start=1)]
    for candidate in result[1:]:
        logger.debug(f"🌳 Candidate #{candidate.rank}: weight {candidate.total_weight:.6f}")
    logger.info(f"🌳 {len(result)} Steiner candidates; seed weight {result[0].total_weight:.6f}")
    return result


def select_seed(cands: Sequence[CandidateModel]) -> SemanticModel:
    """Lowest-weight candidate (rank 1)."""
    if not cands:
        raise SteinerError("no candidate models to choose a seed from")
    return min(cands, key=lambda c: (c.total_weight, c.code)).model
