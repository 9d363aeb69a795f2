#!/usr/bin/env python3
"""
⛏️ Mining missing substructures

Grow-and-store search for frequent supergraphs of the corrected seed model
that give every isolated column a place:
- one candidate type per isolated column per combination
- growth by single edges from the knowledge graph's schema triples, either
  to a fresh class node or closing between two present ones
- minimum image-based frequency against the knowledge graph
- pruning by the constraint map, by seed closure and by the top-sigma
  frequency list
"""

import bisect
import json
import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from core.config import MiningConfig
from core.errors import DataError
from core.graph_match import canonical_code, min_image_frequency
from core.labeling import CandidateTypeSet, SemanticType
from models.knowledge_graph import KnowledgeGraph
from models.semantic_model import OBJECT, ClassNode, Edge, SemanticModel

logger = logging.getLogger(__name__)

NewType = Tuple[str, SemanticType]


@dataclass(frozen=True)
class ConstraintMap:
    """Maximum number of instances per class; classes not listed are unbounded."""
    entries: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        entries = dict(self.entries)
        for cls, count in entries.items():
            if not isinstance(count, int) or count < 1:
                raise DataError(f"constraint for '{cls}' must be an integer >= 1, got {count!r}")
        object.__setattr__(self, "entries", MappingProxyType(entries))

    def cap(self, cls: str) -> Optional[int]:
        return self.entries.get(cls)

    def to_dict(self) -> Dict[str, int]:
        return dict(sorted(self.entries.items()))


def load_constraint_map(path: Union[str, Path]) -> ConstraintMap:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DataError("constraint map not found", str(path)) from e
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON: {e.msg}", str(path), e.lineno) from e
    if not isinstance(data, dict):
        raise DataError("constraint map must be a JSON object of class -> count", str(path))
    try:
        return ConstraintMap(data)
    except DataError as e:
        raise DataError(str(e), str(path)) from e


@dataclass(frozen=True)
class MinedModel:
    model: SemanticModel
    frequency: int
    canonical: str

    def edge_count(self) -> int:
        return len(self.model.object_edges())


def check_constraints(ext: SemanticModel, cm: ConstraintMap) -> bool:
    """True iff no class has more instances than its cap (the cap itself is allowed)."""
    counts: Dict[str, int] = {}
    for node in ext.class_nodes:
        counts[node.label] = counts.get(node.label, 0) + 1
    return all(cm.cap(cls) is None or count <= cm.cap(cls) for cls, count in counts.items())


def seed_closure_prune(ext: SemanticModel, sd: SemanticModel) -> bool:
    """False (prune) iff ext holds both endpoints of a seed edge but not the edge."""
    present = {(e.src, e.label, e.dst) for e in ext.object_edges()}
    for edge in sd.object_edges():
        if ext.has_node(edge.src) and ext.has_node(edge.dst) and (edge.src, edge.label, edge.dst) not in present:
            return False
    return True


class _SearchState:
    """Shared across type combinations: memoised frequencies, visited codes, top-sigma list, covers."""

    def __init__(self, kg: KnowledgeGraph, sigma: Optional[int]):
        self.kg = kg
        self.sigma = sigma
        self.freqs: List[int] = []
        self.memo: Dict[str, int] = {}
        self.covers: Dict[str, MinedModel] = {}
        self.evaluated = 0

    def frequency(self, model: SemanticModel) -> int:
        pattern = model.to_pattern()
        code = canonical_code(pattern)
        if code not in self.memo:
            self.memo[code] = min_image_frequency(pattern, self.kg)
            self.evaluated += 1
        return self.memo[code]

    def can_beat(self, freq: int) -> bool:
        if self.sigma is None or len(self.freqs) < self.sigma:
            return freq > 0
        return freq > self.freqs[0]

    def record(self, mined: MinedModel) -> None:
        known = self.covers.get(mined.canonical)
        if known is not None:
            return
        self.covers[mined.canonical] = mined
        if not self.can_beat(mined.frequency):
            return
        if self.sigma is not None and len(self.freqs) >= self.sigma:
            self.freqs.pop(0)
        bisect.insort(self.freqs, mined.frequency)


def _extensions(model: SemanticModel, kg: KnowledgeGraph) -> Iterator[SemanticModel]:
    """Every model one schema triple larger.

    Either a fresh class node hangs off an existing one, or a closing edge joins
    two class nodes already present.
    """
    triples = sorted(kg.schema_projection)
    for node in model.class_nodes:
        for s, p, o in triples:
            if s == node.label:
                fresh = model.fresh_class_node(o)
                yield model.with_changes(add_class_nodes=[fresh], add_edges=[Edge(node.id, p, fresh.id, OBJECT)])
            if o == node.label:
                fresh = model.fresh_class_node(s)
                yield model.with_changes(add_class_nodes=[fresh], add_edges=[Edge(fresh.id, p, node.id, OBJECT)])
    present = {(e.src, e.label, e.dst) for e in model.object_edges()}
    for src in model.class_nodes:
        for dst in model.class_nodes:
            if src.id == dst.id:
                continue
            for s, p, o in triples:
                if (s, o) == (src.label, dst.label) and (src.id, p, dst.id) not in present:
                    yield model.with_changes(add_edges=[Edge(src.id, p, dst.id, OBJECT)])


def _cover(ext: SemanticModel, new_types: Sequence[NewType], sd_ids: Set[str]) -> Optional[SemanticModel]:
    """ext with every new attribute placed on its own free (class node, property) slot.

    Nodes added by mining are preferred over seed nodes, lowest id first.
    """
    used = set(ext.used_slots())
    placements = []
    for column, semantic_type in new_types:
        nodes = sorted(ext.instances(semantic_type.class_name), key=lambda n: (n.id in sd_ids, n.id))
        slot = next(((n.id, semantic_type.property) for n in nodes
                     if (n.id, semantic_type.property) not in used), None)
        if slot is None:
            return None
        used.add(slot)
        placements.append((column, slot))
    covered = ext
    for column, (node_id, prop) in placements:
        covered = covered.with_attribute(column, node_id, prop)
    return covered


def subgraph_extension(kg: KnowledgeGraph, s: SemanticModel, new_types: Sequence[NewType], sd: SemanticModel,
                       cm: ConstraintMap, cfg: Optional[MiningConfig] = None, state: Optional[_SearchState] = None,
                       prune: bool = True) -> List[MinedModel]:
    """Grow `s` one edge at a time; return the covers of `new_types` found on the way.

    With `prune=False` the constraint map and seed-closure checks are applied
    to the results only, not during the search.
    """
    cfg = cfg or MiningConfig()
    state = state or _SearchState(kg, cfg.sigma)
    sd_ids = {n.id for n in sd.class_nodes}
    visited: Set[str] = set()
    found: Dict[str, MinedModel] = {}

    def admissible(model: SemanticModel) -> bool:
        return check_constraints(model, cm) and seed_closure_prune(model, sd)

    def try_cover(model: SemanticModel, freq: int) -> bool:
        covered = _cover(model, new_types, sd_ids)
        if covered is None:
            return False
        if admissible(model):
            final = covered.renumbered()
            mined = MinedModel(final, freq, canonical_code(final.to_pattern(include_data=True)))
            found.setdefault(mined.canonical, mined)
            state.record(mined)
        return True

    def grow(model: SemanticModel) -> None:
        if len(model.object_edges()) >= cfg.max_pattern_edges:
            return
        for ext in _extensions(model, kg):
            code = canonical_code(ext.to_pattern(include_data=True))
            if code in visited:
                continue
            visited.add(code)
            freq = state.frequency(ext)
            if freq < 1:
                continue
            if prune and not admissible(ext):
                continue
            if try_cover(ext, freq):
                continue
            if state.can_beat(freq):
                grow(ext)

    root_freq = state.frequency(s) if s.class_nodes else 0
    if root_freq >= 1 and (not prune or admissible(s)) and try_cover(s, root_freq):
        return list(found.values())
    if root_freq >= 1:
        visited.add(canonical_code(s.to_pattern(include_data=True)))
        grow(s)
    return list(found.values())


def _start_models(sd: SemanticModel, new_types: Sequence[NewType]) -> List[SemanticModel]:
    if sd.class_nodes:
        return [sd]
    # nothing survived correction: start from a lone node of the first chosen class
    first = new_types[0][1].class_name
    return [SemanticModel((ClassNode(f"{first}1", first, 1),))]


def add_missing_substructures(sd: SemanticModel, kg: KnowledgeGraph, cm: ConstraintMap,
                              iso_types: Mapping[str, CandidateTypeSet], cfg: Optional[MiningConfig] = None,
                              prune: bool = True) -> List[MinedModel]:
    """Ranked completions of sd over every combination of the isolated columns' types."""
    cfg = cfg or MiningConfig()
    state = _SearchState(kg, cfg.sigma)
    if not iso_types:
        freq = state.frequency(sd) if sd.class_nodes else 0
        return [MinedModel(sd, freq, canonical_code(sd.to_pattern(include_data=True)))]

    columns = sorted(iso_types)
    choices = [iso_types[c].types() for c in columns]
    results: Dict[str, MinedModel] = {}
    for combination in product(*choices):
        new_types = list(zip(columns, combination))
        for start in _start_models(sd, new_types):
            for mined in subgraph_extension(kg, start, new_types, sd, cm, cfg, state, prune):
                results.setdefault(mined.canonical, mined)
        logger.debug(f"⛏️ Combination {', '.join(str(t) for t in combination)}: {len(results)} covers so far")

    ranked = sorted(results.values(), key=lambda m: (-m.frequency, m.edge_count(), m.canonical))
    if cfg.sigma is not None:
        ranked = ranked[:cfg.sigma]
    logger.info(
        f"⛏️ Mined {len(results)} completions ({state.evaluated} frequency evaluations); "
        f"top frequency {ranked[0].frequency if ranked else 0}"
    )
    return ranked
