#!/usr/bin/env python3
"""
📖 Domain ontology model

Classes, object properties, data properties and the subclass relation,
loaded from the JSON ontology export:

    {"classes": [...],
     "object_properties": [{"name", "domain", "range"}],
     "data_properties": [{"name", "domain"}],
     "subclass": [{"child", "parent"}]}
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Set, Tuple, Union

import networkx as nx

from core.errors import OntologyError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class ObjectProperty:
    name: str
    domain: str
    range: str


@dataclass(frozen=True, order=True)
class DataProperty:
    name: str
    domain: str


@dataclass(frozen=True)
class Ontology:
    """Validated, immutable ontology."""
    classes: FrozenSet[str] = frozenset()
    object_properties: FrozenSet[ObjectProperty] = frozenset()
    data_properties: FrozenSet[DataProperty] = frozenset()
    subclass_edges: FrozenSet[Tuple[str, str]] = frozenset()
    # parent -> child, so a class's ancestors are its superclasses
    _hierarchy: nx.DiGraph = field(default_factory=nx.DiGraph, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "classes", frozenset(self.classes))
        object.__setattr__(self, "object_properties", frozenset(self.object_properties))
        object.__setattr__(self, "data_properties", frozenset(self.data_properties))
        object.__setattr__(self, "subclass_edges", frozenset(tuple(e) for e in self.subclass_edges))
        hierarchy = nx.DiGraph()
        hierarchy.add_edges_from((parent, child) for child, parent in self.subclass_edges)
        object.__setattr__(self, "_hierarchy", hierarchy)

    def validate(self, source: Optional[str] = None) -> "Ontology":
        """Check referential integrity and acyclicity; return self."""
        for prop in sorted(self.object_properties):
            for cls in (prop.domain, prop.range):
                if cls not in self.classes:
                    raise OntologyError(f"object property '{prop.name}' references undeclared class '{cls}'", source)
        for prop in sorted(self.data_properties):
            if prop.domain not in self.classes:
                raise OntologyError(f"data property '{prop.name}' references undeclared class '{prop.domain}'", source)
        for cls in sorted(self._hierarchy):
            if cls not in self.classes:
                raise OntologyError(f"subclass edge references undeclared class '{cls}'", source)
        if not nx.is_directed_acyclic_graph(self._hierarchy):
            cycle = nx.find_cycle(self._hierarchy)
            raise OntologyError(f"subclass cycle through {' -> '.join(u for u, _ in cycle)}", source)
        return self

    def superclasses(self, cls: str) -> Set[str]:
        """All ancestors of a class, the class itself included."""
        if cls not in self._hierarchy:
            return {cls}
        return nx.ancestors(self._hierarchy, cls) | {cls}

    def is_a(self, cls: str, other: str, use_subclasses: bool = False) -> bool:
        if cls == other:
            return True
        return use_subclasses and other in self.superclasses(cls)

    def object_property_names(self) -> Set[str]:
        return {p.name for p in self.object_properties}

    def data_property_names(self) -> Set[str]:
        return {p.name for p in self.data_properties}

    def properties_between(self, domain: str, range_: str, use_subclasses: bool = False) -> List[str]:
        """Object properties usable from `domain` to `range_`, sorted by name."""
        names = {
            p.name for p in self.object_properties
            if self.is_a(domain, p.domain, use_subclasses) and self.is_a(range_, p.range, use_subclasses)
        }
        return sorted(names)

    def allows_object_edge(self, domain: str, label: str, range_: str, use_subclasses: bool = True) -> bool:
        return label in self.properties_between(domain, range_, use_subclasses)

    def has_semantic_type(self, cls: str, prop: str, use_subclasses: bool = True) -> bool:
        return any(p.name == prop and self.is_a(cls, p.domain, use_subclasses) for p in self.data_properties)

    def to_dict(self) -> Dict:
        return {
            "classes": sorted(self.classes),
            "object_properties": [
                {"name": p.name, "domain": p.domain, "range": p.range} for p in sorted(self.object_properties)
            ],
            "data_properties": [{"name": p.name, "domain": p.domain} for p in sorted(self.data_properties)],
            "subclass": [{"child": c, "parent": p} for c, p in sorted(self.subclass_edges)],
        }

    @classmethod
    def from_dict(cls, data: Dict, source: Optional[str] = None) -> "Ontology":
        if not isinstance(data, dict):
            raise OntologyError("ontology document must be a JSON object", source)
        try:
            onto = cls(
                classes=frozenset(data.get("classes", [])),
                object_properties=frozenset(
                    ObjectProperty(p["name"], p["domain"], p["range"]) for p in data.get("object_properties", [])
                ),
                data_properties=frozenset(DataProperty(p["name"], p["domain"]) for p in data.get("data_properties", [])),
                subclass_edges=frozenset((e["child"], e["parent"]) for e in data.get("subclass", [])),
            )
        except (KeyError, TypeError) as e:
            raise OntologyError(f"malformed ontology entry: {e}", source) from e
        return onto.validate(source)


def load_ontology(path: Union[str, Path]) -> Ontology:
    """Parse and validate an ontology JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise OntologyError("ontology file not found", str(path)) from e
    except json.JSONDecodeError as e:
        raise OntologyError(f"invalid JSON: {e.msg}", str(path), e.lineno) from e
    onto = Ontology.from_dict(data, str(path))
    logger.info(
        f"📖 Loaded ontology {path.name}: {len(onto.classes)} classes, "
        f"{len(onto.object_properties) + len(onto.data_properties)} properties"
    )
    return onto


def save_ontology(onto: Ontology, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(onto.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
