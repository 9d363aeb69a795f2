#!/usr/bin/env python3
"""
🕸️ Semantic model

Directed labelled graph of ontology class nodes and source-attribute data
nodes. Object edges join class nodes; data edges join a class node to a data
node and carry the data property, which together with the class label forms
the attribute's semantic type.

Model file format:

    {"nodes": [{"id", "kind": "class"|"data", "label", "index"?}],
     "edges": [{"src", "label", "dst", "kind": "object"|"data"}]}
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx

from core.errors import ModelFormatError
from models.pattern import PatternGraph

logger = logging.getLogger(__name__)

OBJECT = "object"
DATA = "data"


@dataclass(frozen=True, order=True)
class ClassNode:
    id: str
    label: str
    index: int = 1

    @property
    def name(self) -> str:
        """Rendered name, e.g. E52_Time-Span2."""
        return f"{self.label}{self.index}"


@dataclass(frozen=True, order=True)
class DataNode:
    id: str
    attribute: str


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    label: str
    dst: str
    kind: str = OBJECT


def data_node_id(attribute: str) -> str:
    return f"@{attribute}"


@dataclass(frozen=True)
class SemanticModel:
    """Immutable semantic model. Use the `with_*` helpers to derive new models."""
    class_nodes: Tuple[ClassNode, ...] = ()
    data_nodes: Tuple[DataNode, ...] = ()
    edges: Tuple[Edge, ...] = ()
    _index: Dict[str, object] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "class_nodes", tuple(sorted(set(self.class_nodes))))
        object.__setattr__(self, "data_nodes", tuple(sorted(set(self.data_nodes))))
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges))))
        index: Dict[str, object] = {}
        for node in self.class_nodes + self.data_nodes:
            if node.id in index:
                raise ModelFormatError(f"duplicate node id '{node.id}'")
            index[node.id] = node
        object.__setattr__(self, "_index", index)
        self._check()

    def _check(self) -> None:
        names = [(n.label, n.index) for n in self.class_nodes]
        if len(set(names)) != len(names):
            raise ModelFormatError("(class, instance-index) pairs must be unique")
        if any(n.index < 1 for n in self.class_nodes):
            raise ModelFormatError("instance indices start at 1")
        in_degree: Dict[str, int] = {}
        for edge in self.edges:
            src = self._index.get(edge.src)
            dst = self._index.get(edge.dst)
            if src is None or dst is None:
                raise ModelFormatError(f"edge {edge.src} -[{edge.label}]-> {edge.dst} references a missing node")
            if not isinstance(src, ClassNode):
                raise ModelFormatError(f"edge source '{edge.src}' must be a class node")
            if edge.kind == OBJECT and not isinstance(dst, ClassNode):
                raise ModelFormatError(f"object edge target '{edge.dst}' must be a class node")
            if edge.kind == DATA and not isinstance(dst, DataNode):
                raise ModelFormatError(f"data edge target '{edge.dst}' must be a data node")
            if edge.kind not in (OBJECT, DATA):
                raise ModelFormatError(f"unknown edge kind '{edge.kind}'")
            if edge.kind == DATA:
                in_degree[edge.dst] = in_degree.get(edge.dst, 0) + 1
        for node in self.data_nodes:
            if in_degree.get(node.id, 0) != 1:
                raise ModelFormatError(f"data node '{node.attribute}' must have exactly one incoming data edge")

    # ------------------------------------------------------------------ lookups

    def node(self, node_id: str):
        return self._index[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._index

    def is_class(self, node_id: str) -> bool:
        return isinstance(self._index.get(node_id), ClassNode)

    def render(self, node_id: str) -> str:
        node = self._index[node_id]
        return node.name if isinstance(node, ClassNode) else node.attribute

    def object_edges(self) -> List[Edge]:
        return [e for e in self.edges if e.kind == OBJECT]

    def data_edges(self) -> List[Edge]:
        return [e for e in self.edges if e.kind == DATA]

    def attributes(self) -> List[str]:
        return sorted(n.attribute for n in self.data_nodes)

    def instances(self, label: str) -> List[ClassNode]:
        return [n for n in self.class_nodes if n.label == label]

    def class_labels(self) -> Set[str]:
        return {n.label for n in self.class_nodes}

    def next_index(self, label: str) -> int:
        return max((n.index for n in self.instances(label)), default=0) + 1

    def fresh_class_node(self, label: str) -> ClassNode:
        index = self.next_index(label)
        node_id = f"{label}{index}"
        while node_id in self._index:
            node_id += "_"
        return ClassNode(node_id, label, index)

    def owner_of(self, attribute: str) -> Optional[Tuple[ClassNode, Edge]]:
        """Class node annotating `attribute` and the data edge doing so."""
        target = self._data_id(attribute)
        for edge in self.edges:
            if edge.kind == DATA and edge.dst == target:
                return self._index[edge.src], edge
        return None

    def semantic_type_of(self, attribute: str) -> Optional[Tuple[str, str]]:
        owned = self.owner_of(attribute)
        if owned is None:
            return None
        node, edge = owned
        return node.label, edge.label

    def incoming(self, node_id: str, kind: str = OBJECT) -> List[Edge]:
        return [e for e in self.edges if e.dst == node_id and e.kind == kind]

    def outgoing(self, node_id: str, kind: str = OBJECT) -> List[Edge]:
        return [e for e in self.edges if e.src == node_id and e.kind == kind]

    def used_slots(self) -> Set[Tuple[str, str]]:
        """(class node id, data property) pairs already carrying an attribute."""
        return {(e.src, e.label) for e in self.data_edges()}

    def _data_id(self, attribute: str) -> Optional[str]:
        for node in self.data_nodes:
            if node.attribute == attribute:
                return node.id
        return None

    # ------------------------------------------------------------------ derivation

    def with_changes(
        self,
        add_class_nodes: Iterable[ClassNode] = (),
        add_data_nodes: Iterable[DataNode] = (),
        add_edges: Iterable[Edge] = (),
        remove_edges: Iterable[Edge] = (),
        remove_nodes: Iterable[str] = (),
    ) -> "SemanticModel":
        drop_nodes = set(remove_nodes)
        drop_edges = set(remove_edges)
        class_nodes = [n for n in self.class_nodes if n.id not in drop_nodes] + list(add_class_nodes)
        data_nodes = [n for n in self.data_nodes if n.id not in drop_nodes] + list(add_data_nodes)
        edges = [
            e for e in self.edges
            if e not in drop_edges and e.src not in drop_nodes and e.dst not in drop_nodes
        ] + list(add_edges)
        return SemanticModel(tuple(class_nodes), tuple(data_nodes), tuple(edges))

    def with_attribute(self, attribute: str, owner_id: str, prop: str) -> "SemanticModel":
        node = DataNode(data_node_id(attribute), attribute)
        return self.with_changes(add_data_nodes=[node], add_edges=[Edge(owner_id, prop, node.id, DATA)])

    def restricted_to(self, class_ids: Iterable[str], object_edges: Iterable[Edge] = None) -> "SemanticModel":
        """Keep the given class nodes, their data nodes, and the given (or induced) object edges."""
        keep = set(class_ids)
        if object_edges is None:
            kept_edges = [e for e in self.object_edges() if e.src in keep and e.dst in keep]
        else:
            kept_edges = list(object_edges)
        data_edges = [e for e in self.data_edges() if e.src in keep]
        data_ids = {e.dst for e in data_edges}
        return SemanticModel(
            tuple(n for n in self.class_nodes if n.id in keep),
            tuple(n for n in self.data_nodes if n.id in data_ids),
            tuple(kept_edges + data_edges),
        )

    def renumbered(self) -> "SemanticModel":
        """Reassign instance indices 1..m per class (ordered by old index, then id); ids become names."""
        mapping: Dict[str, ClassNode] = {}
        by_label: Dict[str, List[ClassNode]] = {}
        for node in self.class_nodes:
            by_label.setdefault(node.label, []).append(node)
        for label, nodes in by_label.items():
            for i, node in enumerate(sorted(nodes, key=lambda n: (n.index, n.id)), start=1):
                mapping[node.id] = ClassNode(f"{label}{i}", label, i)
        data_map = {n.id: DataNode(data_node_id(n.attribute), n.attribute) for n in self.data_nodes}

        def remap(node_id: str) -> str:
            return mapping[node_id].id if node_id in mapping else data_map[node_id].id

        edges = tuple(Edge(remap(e.src), e.label, remap(e.dst), e.kind) for e in self.edges)
        return SemanticModel(tuple(mapping.values()), tuple(data_map.values()), edges)

    # ------------------------------------------------------------------ views

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        for node in self.class_nodes:
            graph.add_node(node.id, kind="class", label=node.label)
        for node in self.data_nodes:
            graph.add_node(node.id, kind="data", label=node.attribute)
        for edge in self.edges:
            graph.add_edge(edge.src, edge.dst, label=edge.label, kind=edge.kind)
        return graph

    def is_connected(self) -> bool:
        if not self.class_nodes and not self.data_nodes:
            return True
        return nx.is_weakly_connected(self.to_networkx())

    def to_pattern(self, include_data: bool = False) -> PatternGraph:
        nodes = [(n.id, n.label) for n in self.class_nodes]
        edges = [(e.src, e.label, e.dst) for e in self.object_edges()]
        if include_data:
            nodes += [(n.id, f"@{n.attribute}") for n in self.data_nodes]
            edges += [(e.src, e.label, e.dst) for e in self.data_edges()]
        return PatternGraph(tuple(nodes), tuple(edges))

    def to_dict(self) -> Dict:
        nodes = [{"id": n.id, "kind": "class", "label": n.label, "index": n.index} for n in self.class_nodes]
        nodes += [{"id": n.id, "kind": "data", "label": n.attribute} for n in self.data_nodes]
        edges = [{"src": e.src, "label": e.label, "dst": e.dst, "kind": e.kind} for e in self.edges]
        return {"nodes": nodes, "edges": edges}

    @classmethod
    def from_dict(cls, data: Dict, source: Optional[str] = None) -> "SemanticModel":
        try:
            class_nodes, data_nodes, edges = [], [], []
            for entry in data["nodes"]:
                if entry["kind"] == "class":
                    class_nodes.append(ClassNode(entry["id"], entry["label"], int(entry.get("index", 1))))
                elif entry["kind"] == "data":
                    data_nodes.append(DataNode(entry["id"], entry["label"]))
                else:
                    raise ModelFormatError(f"unknown node kind '{entry['kind']}'", source)
            for entry in data["edges"]:
                edges.append(Edge(entry["src"], entry["label"], entry["dst"], entry.get("kind", OBJECT)))
            return cls(tuple(class_nodes), tuple(data_nodes), tuple(edges))
        except ModelFormatError as e:
            if source and not e.path:
                raise ModelFormatError(str(e), source) from e
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed semantic model: {e}", source) from e

    @classmethod
    def build(
        cls,
        object_edges: Iterable[Tuple[str, str, str]] = (),
        attributes: Iterable[Tuple[str, str, str]] = (),
        classes: Iterable[str] = (),
    ) -> "SemanticModel":
        """Build from rendered names: edges ("E12_Production1", "P4_has_time-span", "E52_Time-Span1")
        and attributes ("E52_Time-Span1", "P82a_begin_of_the_begin", "Begin Date")."""
        names: Dict[str, ClassNode] = {}

        def class_node(name: str) -> ClassNode:
            if name not in names:
                label, index = split_name(name)
                names[name] = ClassNode(name, label, index)
            return names[name]

        for name in classes:
            class_node(name)
        edges = []
        for src, prop, dst in object_edges:
            edges.append(Edge(class_node(src).id, prop, class_node(dst).id, OBJECT))
        data_nodes = []
        for owner, prop, attribute in attributes:
            node = DataNode(data_node_id(attribute), attribute)
            data_nodes.append(node)
            edges.append(Edge(class_node(owner).id, prop, node.id, DATA))
        return cls(tuple(names.values()), tuple(data_nodes), tuple(edges))


def split_name(name: str) -> Tuple[str, int]:
    """'E52_Time-Span2' -> ('E52_Time-Span', 2); a name without trailing digits is instance 1."""
    digits = len(name) - len(name.rstrip("0123456789"))
    if digits == 0 or digits == len(name):
        return name, 1
    return name[:-digits], int(name[-digits:])


def model_triples(model: SemanticModel) -> Set[Tuple[str, str, str]]:
    """One (rendered source, label, rendered target) triple per edge."""
    return {(model.render(e.src), e.label, model.render(e.dst)) for e in model.edges}


def load_model(path: Union[str, Path]) -> SemanticModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ModelFormatError("model file not found", str(path)) from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"invalid JSON: {e.msg}", str(path), e.lineno) from e
    return SemanticModel.from_dict(data, str(path))


def save_model(model: SemanticModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
