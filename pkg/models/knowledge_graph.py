#!/usr/bin/env python3
"""
🌐 Knowledge graph

Instance-level graph of typed entities and object-property relations, read
from tab-separated quads:

    subject_id <TAB> subject_class <TAB> property <TAB> object_id <TAB> object_class

Built for each held-out source by materializing every other source's rows
through its semantic model.
"""

import logging
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple, Union

import networkx as nx

from core.errors import KnowledgeGraphError
from models.source import SourceDescription

logger = logging.getLogger(__name__)

Triple = Tuple[str, str, str]


class KnowledgeGraph:
    """Immutable typed multigraph; matching views are built lazily and cached."""

    def __init__(self, entities: Mapping[str, str], relations: Iterable[Triple] = ()):
        self._entities = MappingProxyType(dict(entities))
        self._relations = tuple(tuple(r) for r in relations)
        for subject, prop, obj in self._relations:
            if subject not in self._entities or obj not in self._entities:
                raise KnowledgeGraphError(f"relation ({subject}, {prop}, {obj}) has an unknown endpoint")
        self._filtered: Dict[FrozenSet[str], nx.DiGraph] = {}

    @property
    def entities(self) -> Mapping[str, str]:
        return self._entities

    @property
    def relations(self) -> Tuple[Triple, ...]:
        return self._relations

    def __len__(self) -> int:
        return len(self._entities)

    def is_empty(self) -> bool:
        return not self._entities

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return dict(self._entities) == dict(other._entities) and sorted(self._relations) == sorted(other._relations)

    def __repr__(self) -> str:
        return f"KnowledgeGraph({len(self._entities)} entities, {len(self._relations)} relations)"

    @cached_property
    def schema_projection(self) -> FrozenSet[Triple]:
        """Distinct (subject class, property, object class) triples."""
        return frozenset((self._entities[s], p, self._entities[o]) for s, p, o in self._relations)

    @cached_property
    def _by_class(self) -> Dict[str, Tuple[str, ...]]:
        grouped: Dict[str, List[str]] = {}
        for entity, cls in self._entities.items():
            grouped.setdefault(cls, []).append(entity)
        return {cls: tuple(sorted(ids)) for cls, ids in grouped.items()}

    def entities_of_class(self, cls: str) -> Tuple[str, ...]:
        return self._by_class.get(cls, ())

    def classes(self) -> FrozenSet[str]:
        return frozenset(self._by_class)

    @cached_property
    def digraph(self) -> nx.DiGraph:
        """Simple DiGraph: node attribute `cls`, edge attribute `labels` (all properties u -> v)."""
        graph = nx.DiGraph()
        for entity in sorted(self._entities):
            graph.add_node(entity, cls=self._entities[entity])
        for subject, prop, obj in self._relations:
            if graph.has_edge(subject, obj):
                graph[subject][obj]["labels"] = graph[subject][obj]["labels"] | {prop}
            else:
                graph.add_edge(subject, obj, labels=frozenset({prop}))
        return graph

    def restricted_to_classes(self, classes: Iterable[str]) -> nx.DiGraph:
        """Copy of `digraph` keeping only entities of the given classes (cached per class set)."""
        key = frozenset(classes)
        if key not in self._filtered:
            if len(self._filtered) > 256:
                self._filtered.clear()
            keep = [e for cls in sorted(key) for e in self.entities_of_class(cls)]
            self._filtered[key] = self.digraph.subgraph(keep).copy()
        return self._filtered[key]

    def union(self, other: "KnowledgeGraph") -> "KnowledgeGraph":
        entities = dict(self._entities)
        for entity, cls in other.entities.items():
            if entities.get(entity, cls) != cls:
                raise KnowledgeGraphError(f"entity '{entity}' typed both {entities[entity]} and {cls}")
            entities[entity] = cls
        return KnowledgeGraph(entities, self._relations + other.relations)

    @classmethod
    def materialize(cls, description: SourceDescription) -> "KnowledgeGraph":
        """One fresh entity per (source, row, class node) and one relation per object edge per row."""
        model = description.model
        name = description.name
        entities: Dict[str, str] = {}
        relations: List[Triple] = []
        for row in range(description.source.row_count):
            ids = {}
            for node in model.class_nodes:
                entity = f"{name}/r{row}/{node.id}"
                ids[node.id] = entity
                entities[entity] = node.label
            for edge in model.object_edges():
                relations.append((ids[edge.src], edge.label, ids[edge.dst]))
        return cls(entities, relations)

    def to_quads(self) -> List[Tuple[str, str, str, str, str]]:
        return [(s, self._entities[s], p, o, self._entities[o]) for s, p, o in self._relations]


def build_leave_one_out_kg(descriptions: Sequence[SourceDescription], held_out: str) -> KnowledgeGraph:
    """Materialize every description except `held_out` into one knowledge graph."""
    names = [d.name for d in descriptions]
    if held_out not in names:
        raise KnowledgeGraphError(f"held-out source '{held_out}' not among descriptions")
    entities: Dict[str, str] = {}
    relations: List[Triple] = []
    for description in descriptions:
        if description.name == held_out:
            continue
        if not description.model.is_connected():
            raise KnowledgeGraphError(f"model of '{description.name}' is disconnected")
        part = KnowledgeGraph.materialize(description)
        entities.update(part.entities)
        relations.extend(part.relations)
    kg = KnowledgeGraph(entities, relations)
    logger.info(f"🌐 Built knowledge graph without '{held_out}': {len(entities)} entities, {len(relations)} relations")
    return kg


def load_kg(path: Union[str, Path]) -> KnowledgeGraph:
    """Parse a quad file; errors name the offending line."""
    path = Path(path)
    if not path.exists():
        raise KnowledgeGraphError("knowledge graph file not found", str(path))
    entities: Dict[str, str] = {}
    relations: List[Triple] = []
    with path.open(encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 5 or not all(fields):
                raise KnowledgeGraphError(f"expected 5 tab-separated fields, got {len(fields)}", str(path), number)
            subject, subject_cls, prop, obj, obj_cls = fields
            for entity, cls in ((subject, subject_cls), (obj, obj_cls)):
                if entities.setdefault(entity, cls) != cls:
                    raise KnowledgeGraphError(
                        f"entity '{entity}' typed {entities[entity]} earlier, {cls} here", str(path), number
                    )
            relations.append((subject, prop, obj))
    kg = KnowledgeGraph(entities, relations)
    logger.info(f"🌐 Loaded knowledge graph {path.name}: {len(entities)} entities, {len(relations)} relations")
    return kg


def save_kg(kg: KnowledgeGraph, path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for quad in kg.to_quads():
            handle.write("\t".join(quad) + "\n")
