#!/usr/bin/env python3
"""
🗺️ Alignment graph

Weighted search space for seed models:
- known models merged by class label (multiplicity = max in any one model)
- ontology object properties between every pair of present class nodes
- attachment edges from candidate class nodes to the new source's attributes

Weights: known edges 1/(1 + support) < 1 < ontology edges; attachments
1 - confidence + 1e-6. Data slots (class node, property) used by the known
models are kept so the seed search can prefer the known layout.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from core.errors import AlignmentError, ModelFormatError
from core.labeling import CandidateTypeSet
from models.ontology import Ontology
from models.source import SourceDescription

logger = logging.getLogger(__name__)

KNOWN = "known"
ONTOLOGY = "ontology"
EPSILON = 1e-6


@dataclass(frozen=True, order=True)
class AlignmentNode:
    id: str
    label: str
    index: int
    provenance: str = KNOWN
    # added by attach_candidate_types, dropped again by without_attachments
    attached: bool = False


@dataclass(frozen=True, order=True)
class AlignmentEdge:
    src: str
    label: str
    dst: str
    weight: float
    provenance: str = KNOWN
    support: int = 0


@dataclass(frozen=True, order=True)
class AttachmentEdge:
    """Candidate semantic type of `attribute` realised on class node `src`."""
    attribute: str
    src: str
    property: str
    weight: float
    confidence: float
    # the known models put this property on this node
    known_slot: bool = False


@dataclass(frozen=True)
class AlignmentGraph:
    nodes: Tuple[AlignmentNode, ...] = ()
    edges: Tuple[AlignmentEdge, ...] = ()
    attachments: Tuple[AttachmentEdge, ...] = ()
    ontology: Optional[Ontology] = field(default=None, compare=False, repr=False)
    use_subclasses: bool = False
    slots: FrozenSet[Tuple[str, str]] = frozenset()

    def node(self, node_id: str) -> AlignmentNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_ids(self) -> List[str]:
        return [n.id for n in self.nodes]

    def nodes_of(self, label: str) -> List[AlignmentNode]:
        return [n for n in self.nodes if n.label == label]

    def known_edges(self) -> List[AlignmentEdge]:
        return [e for e in self.edges if e.provenance == KNOWN]

    def ontology_edges(self) -> List[AlignmentEdge]:
        return [e for e in self.edges if e.provenance == ONTOLOGY]

    def attributes(self) -> List[str]:
        return sorted({a.attribute for a in self.attachments})

    def attachments_of(self, attribute: str) -> List[AttachmentEdge]:
        return sorted((a for a in self.attachments if a.attribute == attribute), key=lambda a: (a.weight, a.src, a.property))

    def preferred_attachments_of(self, attribute: str) -> List[AttachmentEdge]:
        """Attachments that follow the known layout.

        Where the known models put a property on some node of the class, only those
        nodes and nodes carrying no known slot at all remain.
        """
        owners = {node_id for node_id, _ in self.slots}
        kept = []
        for a in self.attachments_of(attribute):
            label = self.node(a.src).label
            seen = any((n.id, a.property) in self.slots for n in self.nodes_of(label))
            if not seen or a.known_slot or a.src not in owners:
                kept.append(a)
        return kept

    def without_attachments(self) -> "AlignmentGraph":
        base_nodes = tuple(n for n in self.nodes if not n.attached)
        keep = {n.id for n in base_nodes}
        base_edges = tuple(e for e in self.edges if e.src in keep and e.dst in keep)
        graph = replace(self, nodes=base_nodes, edges=base_edges, attachments=())
        return _with_closure(graph) if len(base_nodes) != len(self.nodes) else graph


def _validate_against(description: SourceDescription, onto: Ontology) -> None:
    model = description.model
    for label in sorted(model.class_labels()):
        if label not in onto.classes:
            raise ModelFormatError(f"model of '{description.name}' uses class '{label}' missing from the ontology")
    object_names = onto.object_property_names()
    data_names = onto.data_property_names()
    for edge in model.object_edges():
        if edge.label not in object_names:
            raise ModelFormatError(f"model of '{description.name}' uses object property '{edge.label}' missing from the ontology")
        src, dst = model.node(edge.src).label, model.node(edge.dst).label
        if not onto.allows_object_edge(src, edge.label, dst):
            raise ModelFormatError(f"model of '{description.name}' links '{src}' to '{dst}' by '{edge.label}', "
                                   f"outside its domain or range")
    for edge in model.data_edges():
        if edge.label not in data_names:
            raise ModelFormatError(f"model of '{description.name}' uses data property '{edge.label}' missing from the ontology")
        owner = model.node(edge.src).label
        if not onto.has_semantic_type(owner, edge.label):
            raise ModelFormatError(f"model of '{description.name}' puts '{edge.label}' on '{owner}', outside its domain")


def _with_closure(graph: AlignmentGraph) -> AlignmentGraph:
    """Recompute ontology edges between every ordered pair of distinct nodes."""
    known = [e for e in graph.edges if e.provenance == KNOWN]
    if graph.ontology is None:
        return replace(graph, edges=tuple(sorted(known)))
    present = {(e.src, e.label, e.dst) for e in known}
    inferred = []
    for u in graph.nodes:
        for v in graph.nodes:
            if u.id == v.id:
                continue
            for prop in graph.ontology.properties_between(u.label, v.label, graph.use_subclasses):
                if (u.id, prop, v.id) not in present:
                    inferred.append((u, prop, v))
    total = max(len(inferred), 1)
    onto_edges = [
        AlignmentEdge(u.id, prop, v.id, 1.0 + ((u.index - 1) + (v.index - 1) + 1) / total, ONTOLOGY)
        for u, prop, v in inferred
    ]
    return replace(graph, edges=tuple(sorted(known + onto_edges)))


def build_alignment_graph(known: Sequence[SourceDescription], onto: Ontology, use_subclasses: bool = False) -> AlignmentGraph:
    """Merge the known models and close them under the ontology's object properties."""
    if not known:
        raise AlignmentError("alignment graph needs at least one known model")
    multiplicity: Dict[str, int] = {}
    support: Dict[Tuple[str, str, str], int] = {}
    slots: Set[Tuple[str, str]] = set()
    for description in known:
        _validate_against(description, onto)
        model = description.model.renumbered()
        for label in model.class_labels():
            multiplicity[label] = max(multiplicity.get(label, 0), len(model.instances(label)))
        triples = {(model.node(e.src).name, e.label, model.node(e.dst).name) for e in model.object_edges()}
        for triple in triples:
            support[triple] = support.get(triple, 0) + 1
        slots.update((model.node(e.src).name, e.label) for e in model.data_edges())
    nodes = tuple(
        AlignmentNode(f"{label}{i}", label, i, KNOWN)
        for label in sorted(multiplicity)
        for i in range(1, multiplicity[label] + 1)
    )
    edges = tuple(
        AlignmentEdge(src, prop, dst, 1.0 / (1 + count), KNOWN, count)
        for (src, prop, dst), count in sorted(support.items())
    )
    graph = _with_closure(AlignmentGraph(nodes, edges, (), onto, use_subclasses, frozenset(slots)))
    logger.info(
        f"🗺️ Alignment graph: {len(graph.nodes)} nodes, {len(graph.known_edges())} known edges, "
        f"{len(graph.ontology_edges())} ontology edges"
    )
    return graph


def attach_candidate_types(ag: AlignmentGraph, cands: Sequence[CandidateTypeSet]) -> AlignmentGraph:
    """Add one attachment edge per (attribute, candidate type, class node of that type).

    Always rebuilds from the graph without attachments, so attaching the same
    candidates twice gives the same graph.
    """
    if not cands or any(c.is_empty() for c in cands):
        raise AlignmentError("every attribute needs at least one candidate type")
    base = ag.without_attachments()
    wanted: Dict[str, int] = {}
    for cand in cands:
        for label in {t.class_name for t in cand.types()}:
            wanted[label] = wanted.get(label, 0) + 1
    nodes = list(base.nodes)
    for label in sorted(wanted):
        have = len(base.nodes_of(label))
        for i in range(have + 1, wanted[label] + 1):
            nodes.append(AlignmentNode(f"{label}{i}", label, i, ONTOLOGY, attached=True))
    graph = base
    if len(nodes) != len(base.nodes):
        graph = _with_closure(replace(base, nodes=tuple(sorted(nodes))))
    attachments = []
    for cand in cands:
        for semantic_type, confidence in cand.candidates:
            for node in graph.nodes_of(semantic_type.class_name):
                attachments.append(
                    AttachmentEdge(cand.column, node.id, semantic_type.property, 1.0 - confidence + EPSILON, confidence,
                                   (node.id, semantic_type.property) in graph.slots)
                )
    logger.debug(f"🗺️ Attached {len(attachments)} candidate edges for {len(cands)} attributes")
    return replace(graph, attachments=tuple(sorted(attachments)))


def alignment_to_dot(ag: AlignmentGraph) -> str:
    """Graphviz DOT text of the weighted alignment graph."""
    lines = ["digraph alignment {", "  rankdir=LR;"]
    for node in ag.nodes:
        style = "" if node.provenance == KNOWN else ", style=dashed"
        lines.append(f'  "{node.id}" [shape=ellipse{style}];')
    for attribute in ag.attributes():
        lines.append(f'  "@{attribute}" [shape=box, label="{attribute}"];')
    for edge in ag.edges:
        style = "" if edge.provenance == KNOWN else ", style=dashed"
        lines.append(f'  "{edge.src}" -> "{edge.dst}" [label="{edge.label} ({edge.weight:.4f})"{style}];')
    for a in ag.attachments:
        lines.append(f'  "{a.src}" -> "@{a.attribute}" [label="{a.property} ({a.weight:.4f})", color=blue];')
    lines.append("}")
    return "\n".join(lines) + "\n"
