#!/usr/bin/env python3
"""
🩹 Seed model correction

- Remove relationships the knowledge graph never shows, falling back to the
  maximum common subgraph when the rest still does not embed; columns whose
  class node disappears become isolated columns
- Reduce the candidate types of isolated columns (confidence ratio rule,
  confidence floor, connection-path check against the knowledge graph)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from core.config import TypeReductionConfig
from core.disambiguation import RelationshipClassifier, disambiguate_model
from core.errors import UnlabelableColumnError
from core.graph_match import is_subgraph_isomorphic, max_common_subgraph
from core.labeling import CandidateTypeSet, SemanticType
from models.knowledge_graph import KnowledgeGraph
from models.ontology import Ontology
from models.pattern import PatternGraph
from models.semantic_model import SemanticModel
from models.source import SourceTable

logger = logging.getLogger(__name__)


@dataclass
class CorrectionResult:
    model: SemanticModel
    isolated: List[str] = field(default_factory=list)
    reduced: Dict[str, CandidateTypeSet] = field(default_factory=dict)
    moves: List[Dict[str, str]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def remove_incorrect_relationships(sd: SemanticModel, kg: KnowledgeGraph) -> Tuple[SemanticModel, List[str]]:
    """Drop object edges unseen in the KG schema, then shrink to the MCS if needed.

    Returns the cleaned model and the attributes whose class node was removed.
    """
    projection = kg.schema_projection
    wrong = [
        e for e in sd.object_edges()
        if (sd.node(e.src).label, e.label, sd.node(e.dst).label) not in projection
    ]
    for edge in wrong:
        logger.info(f"🩹 Removing {sd.render(edge.src)} -{edge.label}-> {sd.render(edge.dst)} (not in knowledge graph)")
    filtered = sd.with_changes(remove_edges=wrong)

    if wrong and not filtered.object_edges() and len(sd.class_nodes) > 1:
        logger.info("🩹 Every relationship removed; all columns isolated")
        return SemanticModel(), sd.attributes()

    pattern = filtered.to_pattern()
    if pattern.is_empty() or (pattern.is_connected() and is_subgraph_isomorphic(pattern, kg)):
        kept = filtered
    else:
        mcs = max_common_subgraph(pattern, kg)
        mcs_edges = set(mcs.edges)
        kept_edges = [e for e in filtered.object_edges() if (e.src, e.label, e.dst) in mcs_edges]
        kept = filtered.restricted_to(mcs.node_ids, kept_edges)
        logger.info(f"🩹 Reduced to maximum common subgraph: {len(mcs)}/{len(pattern)} class nodes")

    isolated = sorted(set(sd.attributes()) - set(kept.attributes()))
    if isolated:
        logger.info(f"🩹 Isolated columns: {', '.join(isolated)}")
    return kept, isolated


def _connection_patterns(sd: SemanticModel, kg: KnowledgeGraph, target: str, max_hops: int) -> Iterator[PatternGraph]:
    """sd's pattern plus a path of up to `max_hops` schema triples ending in a fresh `target` node.

    Intermediate nodes are fresh too; a path may leave sd from any class node
    and follow triples in either direction.
    """
    base = sd.to_pattern()
    triples = sorted(kg.schema_projection)

    def grow(pattern: PatternGraph, frontier: str, hops: int) -> Iterator[PatternGraph]:
        label = pattern.label(frontier)
        for s, p, o in triples:
            for forward in (True, False):
                if (s if forward else o) != label:
                    continue
                other = o if forward else s
                fresh = f"~{hops}"
                edge = (frontier, p, fresh) if forward else (fresh, p, frontier)
                extended = pattern.with_edge(*edge, new_node=(fresh, other))
                if other == target:
                    yield extended
                elif hops + 1 < max_hops:
                    yield from grow(extended, fresh, hops + 1)

    for node in sd.class_nodes:
        yield from grow(base, node.id, 0)


def _has_connection(sd: SemanticModel, kg: KnowledgeGraph, semantic_type: SemanticType, max_hops: int) -> bool:
    if not sd.class_nodes:
        return bool(kg.entities_of_class(semantic_type.class_name))
    used = sd.used_slots()
    for node in sd.instances(semantic_type.class_name):
        if (node.id, semantic_type.property) not in used:
            return True
    seen = set()
    for pattern in _connection_patterns(sd, kg, semantic_type.class_name, max_hops):
        if pattern.edges in seen:
            continue
        seen.add(pattern.edges)
        if is_subgraph_isomorphic(pattern, kg):
            return True
    return False


def reduce_semantic_types(sd: SemanticModel, kg: KnowledgeGraph, iso_col: str, cands: CandidateTypeSet,
                          cfg: Optional[TypeReductionConfig] = None) -> CandidateTypeSet:
    """Keep the candidate types of an isolated column that can still be connected to sd."""
    cfg = cfg or TypeReductionConfig()
    survivors = list(cands.candidates)
    if len(survivors) >= 2:
        first, second = survivors[0][1], survivors[1][1]
        eta = first / second if second > 0 else math.inf
        # 0.9 / 0.3 is 3.0000000000000004 in floats and must count as 3
        if eta > cfg.eta_threshold and not math.isclose(eta, cfg.eta_threshold):
            logger.debug(f"🩹 {iso_col}: ratio {eta:.2f} keeps only {survivors[0][0]}")
            survivors = survivors[:1]
    survivors = [(t, c) for t, c in survivors if c >= cfg.min_confidence]
    connected = []
    for semantic_type, confidence in survivors:
        if _has_connection(sd, kg, semantic_type, cfg.max_path_length):
            connected.append((semantic_type, confidence))
        else:
            logger.info(f"🩹 {iso_col}: {semantic_type} cannot be joined to the model")
    if not connected:
        raise UnlabelableColumnError(iso_col)
    return CandidateTypeSet(iso_col, tuple(connected))


def repair_phase_one(sd: SemanticModel, source: SourceTable, kg: KnowledgeGraph,
                     candidates: Sequence[CandidateTypeSet], cfg: Optional[TypeReductionConfig] = None,
                     classifiers: Optional[Dict[str, RelationshipClassifier]] = None,
                     onto: Optional[Ontology] = None) -> CorrectionResult:
    """Move ambiguous relationships, remove incorrect ones, reduce isolated columns' types."""
    moves: List[Dict[str, str]] = []
    model = sd
    if classifiers:
        model, moves = disambiguate_model(sd, source, classifiers, onto, kg)
    cleaned, isolated = remove_incorrect_relationships(model, kg)
    by_column = {c.column: c for c in candidates}
    result = CorrectionResult(cleaned, isolated, {}, moves, [])
    for column in isolated:
        cands = by_column.get(column)
        if cands is None or cands.is_empty():
            result.warnings.append(f"no candidate types for isolated column '{column}'")
            continue
        try:
            result.reduced[column] = reduce_semantic_types(cleaned, kg, column, cands, cfg)
        except UnlabelableColumnError as e:
            fallback = CandidateTypeSet(column, cands.candidates[:1])
            result.reduced[column] = fallback
            message = f"{e}; falling back to {fallback.first()}"
            result.warnings.append(message)
            logger.warning(f"⚠️ {message}")
    return result
