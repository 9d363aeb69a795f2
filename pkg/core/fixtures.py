#!/usr/bin/env python3
"""
🧪 Synthetic dataset generator

Builds a small dataset directory from a fixture spec:
- ontology.json derived from every gold model shape
- models/<source>.json gold models and sources/<source>.csv tables
- kg.tsv (every source materialized) and constraint_map.json
- config.toml pointing at all of the above (leave-one-out KG per run)

A source may carry its own model shape; the others use the spec's base
shape. Each gold model is checked at generation time, without the miner:
with one leaf class removed, every connected growth of the rest by at most
two knowledge-graph edges is enumerated, and the gold model must be the
unique best one (highest support, then fewest edges) with room for the
removed columns.
"""

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import networkx as nx
from networkx.algorithms import isomorphism

from core.errors import FixtureError
from core.graph_match import canonical_code
from core.mining import ConstraintMap
from models.knowledge_graph import KnowledgeGraph, build_leave_one_out_kg, save_kg
from models.ontology import DataProperty, ObjectProperty, Ontology, save_ontology
from models.pattern import PatternGraph
from models.semantic_model import DATA, OBJECT, Edge, SemanticModel, save_model
from models.source import SourceDescription, SourceTable, save_source_csv

logger = logging.getLogger(__name__)

VERIFY_EXTRA_EDGES = 2

_BASE_EDGES = [
    ["E22_Man-Made_Object1", "P108i_was_produced_by", "E12_Production1"],
    ["E12_Production1", "P14_carried_out_by", "E21_Person1"],
    ["E12_Production1", "P4_has_time-span", "E52_Time-Span1"],
    ["E12_Production1", "P32_used_general_technique", "E55_Type1"],
]
_BASE_ATTRIBUTES = [
    ["E22_Man-Made_Object1", "P102_has_title", "Title"],
    ["E21_Person1", "P131_is_identified_by", "Artist"],
    ["E52_Time-Span1", "P82_at_some_time_within", "Date"],
    ["E55_Type1", "rdfs:label", "Medium"],
]
# a second time-span, reached through the artist's birth
_BIRTH_MODEL = {
    "edges": _BASE_EDGES + [
        ["E21_Person1", "P98i_was_born", "E67_Birth1"],
        ["E67_Birth1", "P4_has_time-span", "E52_Time-Span2"],
    ],
    "attributes": _BASE_ATTRIBUTES + [["E52_Time-Span2", "P82a_begin_of_the_begin", "Birth Date"]],
}

# Three museum-like sources; two of them also record when the artist was born
MICRO_SPEC: Dict[str, Any] = {
    "seed": 42,
    "model": {"edges": _BASE_EDGES, "attributes": _BASE_ATTRIBUTES},
    "values": {
        "Title": {"words": ["harbor", "sunset", "portrait", "garden", "river", "winter", "meadow", "lantern"], "tokens": 2},
        "Artist": {"words": ["monet", "renoir", "degas", "cassatt", "sisley", "morisot"], "tokens": 1},
        "Date": {"range": [1850, 1900]},
        "Birth Date": {"range": [1790, 1840]},
        "Medium": {"words": ["oil", "watercolor", "bronze", "charcoal", "tempera", "gouache"], "tokens": 1},
    },
    "sources": [
        {"name": "s1", "rows": 12},
        {"name": "s2", "rows": 10, "model": _BIRTH_MODEL},
        {"name": "s3", "rows": 8, "model": _BIRTH_MODEL},
    ],
}


@dataclass
class FixtureSummary:
    directory: Path
    sources: List[str]
    quads: int
    frequencies: Dict[str, int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "directory": str(self.directory),
            "sources": self.sources,
            "quads": self.quads,
            "frequencies": self.frequencies,
        }


def load_fixture_spec(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Read a JSON fixture spec; without a path the built-in micro-spec is returned."""
    if path is None:
        return json.loads(json.dumps(MICRO_SPEC))
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise FixtureError(f"fixture spec not found: {path}") from e
    except json.JSONDecodeError as e:
        raise FixtureError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e


def _gold_model(shape: Any, where: str) -> SemanticModel:
    try:
        model = SemanticModel.build(
            [tuple(e) for e in shape["edges"]],
            [tuple(a) for a in shape["attributes"]],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FixtureError(f"malformed fixture model ({where}): {e}") from e
    if not model.is_connected():
        raise FixtureError(f"fixture model ({where}) is disconnected")
    if not model.attributes():
        raise FixtureError(f"fixture model ({where}) has no attributes")
    return model


def _source_models(spec: Dict[str, Any]) -> Dict[str, SemanticModel]:
    """Gold model per source: its own shape if it has one, the base shape otherwise."""
    base = None
    models = {}
    for entry in spec["sources"]:
        if "model" in entry:
            models[entry["name"]] = _gold_model(entry["model"], f"source '{entry['name']}'")
            continue
        if base is None:
            base = _gold_model(spec.get("model"), "base")
        models[entry["name"]] = base
    return models


def _check_values(spec: Dict[str, Any], columns: List[str]) -> Dict[str, Dict[str, Any]]:
    """Value generators per column; vocabularies and numeric ranges must not overlap."""
    values = spec.get("values", {})
    seen_words: Dict[str, str] = {}
    ranges: List[Tuple[float, float, str]] = []
    for column in columns:
        gen = values.get(column)
        if not isinstance(gen, dict) or not ({"words", "range"} & set(gen)):
            raise FixtureError(f"no value generator for column '{column}'")
        if "words" in gen:
            if not gen["words"]:
                raise FixtureError(f"empty vocabulary for column '{column}'")
            for word in gen["words"]:
                other = seen_words.setdefault(str(word).lower(), column)
                if other != column:
                    raise FixtureError(f"word '{word}' used by both '{other}' and '{column}'")
        else:
            low, high = (float(v) for v in gen["range"])
            if not low < high:
                raise FixtureError(f"empty range for column '{column}'")
            for other_low, other_high, other in ranges:
                if low <= other_high and other_low <= high:
                    raise FixtureError(f"ranges of '{other}' and '{column}' overlap")
            ranges.append((low, high, column))
    return {c: values[c] for c in columns}


def _cell(gen: Dict[str, Any], rng: random.Random) -> str:
    if "words" in gen:
        count = int(gen.get("tokens", 1))
        return " ".join(rng.choice(gen["words"]) for _ in range(count))
    low, high = (int(v) for v in gen["range"])
    return str(rng.randint(low, high))


def _ontology_for(models: List[SemanticModel], spec: Dict[str, Any]) -> Ontology:
    classes = set(spec.get("extra_classes", []))
    object_properties = set()
    data_properties = set()
    for model in models:
        classes |= model.class_labels()
        object_properties |= {
            ObjectProperty(e.label, model.node(e.src).label, model.node(e.dst).label) for e in model.object_edges()
        }
        data_properties |= {DataProperty(e.label, model.node(e.src).label) for e in model.data_edges()}
    return Ontology(frozenset(classes), frozenset(object_properties), frozenset(data_properties)).validate()


def _leaf(model: SemanticModel) -> str:
    """Highest-id class node with a single object edge and at least one column."""
    degree: Dict[str, int] = {}
    for edge in model.object_edges():
        degree[edge.src] = degree.get(edge.src, 0) + 1
        degree[edge.dst] = degree.get(edge.dst, 0) + 1
    leaves = [
        n.id for n in model.class_nodes
        if degree.get(n.id) == 1 and model.outgoing(n.id, kind=DATA)
    ]
    if not leaves:
        raise FixtureError("fixture model has no leaf class carrying a column")
    return max(leaves)


# ---------------------------------------------------------------------- verification


def _kg_digraph(kg: KnowledgeGraph) -> nx.DiGraph:
    graph = nx.DiGraph()
    for entity, cls in kg.entities.items():
        graph.add_node(entity, cls=cls)
    for subject, prop, obj in kg.relations:
        if graph.has_edge(subject, obj):
            graph[subject][obj]["labels"] = graph[subject][obj]["labels"] | {prop}
        else:
            graph.add_edge(subject, obj, labels=frozenset({prop}))
    return graph


def _support(pattern: PatternGraph, graph: nx.DiGraph) -> int:
    """Fewest distinct entities any pattern node maps to over all monomorphisms; 0 without one."""
    matcher = isomorphism.DiGraphMatcher(
        graph, pattern.to_networkx(),
        node_match=lambda entity, node: entity["cls"] == node["cls"],
        edge_match=lambda relation, edge: edge["labels"] <= relation["labels"],
    )
    images: Dict[str, set] = {node: set() for node in pattern.node_ids}
    for mapping in matcher.subgraph_monomorphisms_iter():
        for entity, node in mapping.items():
            images[node].add(entity)
    return min(len(found) for found in images.values())


def _one_edge_more(model: SemanticModel, triples: List[Tuple[str, str, str]]) -> Iterator[SemanticModel]:
    """Every model one relation-schema edge larger, to a new class node or between present ones."""
    present = {(e.src, e.label, e.dst) for e in model.object_edges()}
    for subject_cls, prop, object_cls in triples:
        subjects = model.instances(subject_cls)
        objects = model.instances(object_cls)
        for node in subjects:
            fresh = model.fresh_class_node(object_cls)
            yield model.with_changes(add_class_nodes=[fresh], add_edges=[Edge(node.id, prop, fresh.id, OBJECT)])
        for node in objects:
            fresh = model.fresh_class_node(subject_cls)
            yield model.with_changes(add_class_nodes=[fresh], add_edges=[Edge(fresh.id, prop, node.id, OBJECT)])
        for src in subjects:
            for dst in objects:
                if src.id != dst.id and (src.id, prop, dst.id) not in present:
                    yield model.with_changes(add_edges=[Edge(src.id, prop, dst.id, OBJECT)])


def _has_room(model: SemanticModel, wanted: Counter) -> bool:
    used = model.used_slots()
    for (cls, prop), count in wanted.items():
        if sum(1 for n in model.instances(cls) if (n.id, prop) not in used) < count:
            return False
    return True


def _within_caps(model: SemanticModel, cm: ConstraintMap) -> bool:
    counts = Counter(n.label for n in model.class_nodes)
    return all(cm.cap(label) is None or count <= cm.cap(label) for label, count in counts.items())


def enumerate_completions(seed: SemanticModel, kg: KnowledgeGraph, wanted: Counter, cm: ConstraintMap,
                          extra_edges: int = VERIFY_EXTRA_EDGES) -> Dict[str, Tuple[int, int]]:
    """Canonical code -> (support, object edges) of every growth of `seed` by at most
    `extra_edges` edges that embeds in kg, respects the caps and has a free slot
    for each wanted (class, property). Covers are not grown further.
    """
    graph = _kg_digraph(kg)
    triples = sorted({(kg.entities[s], p, kg.entities[o]) for s, p, o in kg.relations})
    completions: Dict[str, Tuple[int, int]] = {}
    seen = {canonical_code(seed.to_pattern(include_data=True))}
    frontier = [seed]
    if _has_room(seed, wanted):
        support = _support(seed.to_pattern(), graph)
        if support:
            completions[next(iter(seen))] = (support, len(seed.object_edges()))
        frontier = []
    for _ in range(extra_edges):
        grown = []
        for model in frontier:
            for ext in _one_edge_more(model, triples):
                code = canonical_code(ext.to_pattern(include_data=True))
                if code in seen or not _within_caps(ext, cm):
                    continue
                seen.add(code)
                support = _support(ext.to_pattern(), graph)
                if not support:
                    continue
                if _has_room(ext, wanted):
                    completions[code] = (support, len(ext.object_edges()))
                else:
                    grown.append(ext)
        frontier = grown
    return completions


def verify_fixture(descriptions: List[SourceDescription], cm: ConstraintMap) -> Dict[str, int]:
    """Check every gold model is the unique best completion of its one-leaf-short seed.

    Returns the gold model's support per source.
    """
    frequencies = {}
    for description in descriptions:
        gold = description.model
        leaf = _leaf(gold)
        seed = gold.restricted_to([n.id for n in gold.class_nodes if n.id != leaf])
        removed = [n for n in gold.data_nodes if n.attribute not in seed.attributes()]
        wanted = Counter(gold.semantic_type_of(n.attribute) for n in removed)
        kg = build_leave_one_out_kg(descriptions, description.name)
        completions = enumerate_completions(seed, kg, wanted, cm)
        target = canonical_code(gold.with_changes(remove_nodes=[n.id for n in removed]).to_pattern(include_data=True))
        if target not in completions:
            raise FixtureError(f"gold model of '{description.name}' is not a completion of its seed")
        support, edges = completions[target]
        for code, (other_support, other_edges) in completions.items():
            if code == target:
                continue
            if (other_support, -other_edges) > (support, -edges):
                raise FixtureError(f"gold model of '{description.name}' is not the top completion of its seed")
            if (other_support, other_edges) == (support, edges):
                raise FixtureError(
                    f"gold model of '{description.name}' ties with another completion at frequency {support}"
                )
        frequencies[description.name] = support
        logger.info(f"✅ {description.name}: gold is the best of {len(completions)} completions, support {support}")
    return frequencies


def build_fixture(spec: Dict[str, Any]) -> Tuple[Ontology, List[SourceDescription], ConstraintMap]:
    """Generate the in-memory dataset described by `spec` (not yet verified)."""
    sources = spec.get("sources") or []
    if not sources:
        raise FixtureError("fixture spec lists no sources")
    names = [s.get("name") for s in sources]
    if len(set(names)) != len(names) or not all(names):
        raise FixtureError("fixture sources need unique non-empty names")
    if len(sources) < 2:
        raise FixtureError("fixture needs at least 2 sources so every held-out source has a knowledge graph")
    models = _source_models(spec)
    generators = _check_values(spec, sorted({c for m in models.values() for c in m.attributes()}))
    onto = _ontology_for(list(models.values()), spec)
    rng = random.Random(int(spec.get("seed", 42)))
    descriptions = []
    counts: Dict[str, int] = {}
    for entry in sources:
        rows = int(entry.get("rows", 0))
        if rows < 1:
            raise FixtureError(f"source '{entry['name']}' needs at least one row")
        model = models[entry["name"]]
        columns = {c: [_cell(generators[c], rng) for _ in range(rows)] for c in model.attributes()}
        descriptions.append(SourceDescription(SourceTable.from_mapping(entry["name"], columns), model))
        for label, count in Counter(n.label for n in model.class_nodes).items():
            counts[label] = max(counts.get(label, 0), count)
    return onto, descriptions, ConstraintMap(counts)


CONFIG_TEMPLATE = """# Generated dataset; the knowledge graph is rebuilt per held-out source
seed = {seed}
output_dir = "output"

[paths]
ontology = "ontology.json"
models = "models"
sources = "sources"
constraint_map = "constraint_map.json"

[mining]
sigma = 10

[evaluation]
repeats = 1
min_train = {train}
max_train = {train}
"""


def make_fixture(spec: Dict[str, Any], out_dir: Union[str, Path]) -> FixtureSummary:
    """Generate, verify and write a dataset directory."""
    onto, descriptions, cm = build_fixture(spec)
    frequencies = verify_fixture(descriptions, cm)

    out_dir = Path(out_dir)
    (out_dir / "models").mkdir(parents=True, exist_ok=True)
    (out_dir / "sources").mkdir(parents=True, exist_ok=True)
    save_ontology(onto, out_dir / "ontology.json")
    kg = KnowledgeGraph({})
    for description in descriptions:
        save_model(description.model, out_dir / "models" / f"{description.name}.json")
        save_source_csv(description.source, out_dir / "sources" / f"{description.name}.csv")
        kg = kg.union(KnowledgeGraph.materialize(description))
    save_kg(kg, out_dir / "kg.tsv")
    (out_dir / "constraint_map.json").write_text(json.dumps(cm.to_dict(), indent=2) + "\n", encoding="utf-8")
    config = CONFIG_TEMPLATE.format(seed=int(spec.get("seed", 42)), train=len(descriptions) - 1)
    (out_dir / "config.toml").write_text(config, encoding="utf-8")

    logger.info(f"🧪 Wrote fixture with {len(descriptions)} sources and {len(kg.relations)} quads to {out_dir}")
    return FixtureSummary(out_dir, [d.name for d in descriptions], len(kg.relations), frequencies)
