#!/usr/bin/env python3
"""
🧭 Relationship disambiguation

A class reached through the same property from several anchor classes
(E52_Time-Span under E12_Production, E67_Birth or E69_Death) is ambiguous.
A decision tree trained on the known sources predicts the right anchor for
each such column of the seed model, and the misplaced relationship is moved.

Features per anchor, against one reference column of that anchor:
name similarity, Jaccard, TF-IDF cosine, KS statistic, Mann-Whitney
statistic, knowledge-base hit.
"""

import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from core.errors import ClassifierError, DataError
from core.labeling import (
    is_numeric,
    jaccard,
    ks_statistic,
    mw_statistic,
    non_empty,
    numeric_sample,
    tfidf_cosine,
)
from models.knowledge_graph import KnowledgeGraph
from models.ontology import Ontology
from models.semantic_model import OBJECT, ClassNode, Edge, SemanticModel
from models.source import SourceDescription, SourceTable

logger = logging.getLogger(__name__)

Anchor = Tuple[str, str]

FEATURES_PER_ANCHOR = 6
_CODE_PREFIX = re.compile(r"^[A-Za-z]{1,3}\d+[a-z]?_")
_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


@dataclass(frozen=True)
class AmbiguousEntity:
    class_name: str
    anchors: Tuple[Anchor, ...]

    def __post_init__(self):
        if len(self.anchors) < 2 or len(set(self.anchors)) != len(self.anchors):
            raise ClassifierError(f"ambiguous entity '{self.class_name}' needs >= 2 distinct anchors")

    @property
    def k(self) -> int:
        return len(self.anchors)

    def labels(self) -> Set[str]:
        return {label for _, label in self.anchors}

    def index_of(self, anchor: Anchor) -> Optional[int]:
        """1-based position of an anchor."""
        try:
            return self.anchors.index(anchor) + 1
        except ValueError:
            return None


@dataclass(frozen=True)
class TrainingColumn:
    source: str
    name: str
    values: Tuple[str, ...]
    label: int


@dataclass(frozen=True)
class FeatureVector:
    name_similarity: Tuple[float, ...]
    jaccard: Tuple[float, ...]
    tfidf_cosine: Tuple[float, ...]
    ks_statistic: Tuple[float, ...]
    mw_statistic: Tuple[float, ...]
    kb_hit: Tuple[int, ...]

    def as_array(self) -> np.ndarray:
        """Anchor-major layout: six features for anchor 1, then anchor 2, ..."""
        rows = zip(self.name_similarity, self.jaccard, self.tfidf_cosine, self.ks_statistic,
                   self.mw_statistic, self.kb_hit)
        return np.array([value for row in rows for value in row], dtype=float)


class KnowledgeBase:
    """Local snapshot of an authority file: category -> known values."""

    def __init__(self, entries: Dict[str, FrozenSet[str]] = None):
        self.entries = {k.lower(): frozenset(v) for k, v in (entries or {}).items()}

    def contains(self, category: str, value: str) -> int:
        return int(str(value).strip().lower() in self.entries.get(category.lower(), frozenset()))

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())


def load_kb(path: Union[str, Path]) -> KnowledgeBase:
    """Read `category<TAB>value` lines; errors name the offending line."""
    path = Path(path)
    if not path.exists():
        raise DataError("knowledge base snapshot not found", str(path))
    entries: Dict[str, Set[str]] = {}
    with path.open(encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip():
                raise DataError("expected 'category<TAB>value'", str(path), number)
            entries.setdefault(parts[0].strip().lower(), set()).add(parts[1].strip().lower())
    kb = KnowledgeBase({k: frozenset(v) for k, v in entries.items()})
    logger.info(f"📚 Loaded knowledge base {path.name}: {len(kb)} values in {len(kb.entries)} categories")
    return kb


def anchor_name(class_name: str) -> str:
    """'E67_Birth' -> 'Birth'."""
    return _CODE_PREFIX.sub("", class_name)


def name_tokens(name: str) -> Set[str]:
    tokens = set()
    for part in re.split(r"[^A-Za-z0-9]+", name):
        tokens.update(t.lower() for t in _CAMEL.findall(part))
    return tokens


def name_similarity(attribute: str, anchor_class: str) -> float:
    a, b = name_tokens(attribute), name_tokens(anchor_name(anchor_class))
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def find_ambiguous_entities(known: Sequence[SourceDescription]) -> List[AmbiguousEntity]:
    """Classes reached by one property from at least two anchor classes across the known models."""
    reached: Dict[Tuple[str, str], Set[str]] = {}
    for description in known:
        model = description.model
        for edge in model.object_edges():
            key = (model.node(edge.dst).label, edge.label)
            reached.setdefault(key, set()).add(model.node(edge.src).label)
    by_class: Dict[str, List[Anchor]] = {}
    for (cls, label), anchors in reached.items():
        if len(anchors) >= 2:
            by_class.setdefault(cls, []).extend((a, label) for a in anchors)
    entities = [AmbiguousEntity(cls, tuple(sorted(anchors))) for cls, anchors in sorted(by_class.items())]
    for entity in entities:
        logger.info(f"🧭 Ambiguous entity {entity.class_name}: {', '.join(a for a, _ in entity.anchors)}")
    return entities


def current_anchor(model: SemanticModel, node_id: str, entity: AmbiguousEntity) -> Optional[Tuple[ClassNode, Edge]]:
    """Anchor node and edge through which `node_id` is reached with one of the entity's labels."""
    labels = entity.labels()
    for edge in sorted(model.incoming(node_id)):
        if edge.label in labels:
            return model.node(edge.src), edge
    return None


def build_training_columns(known: Sequence[SourceDescription], entity: AmbiguousEntity) -> List[TrainingColumn]:
    """Columns annotated on an instance of the entity's class, labelled with their anchor index."""
    columns = []
    for description in known:
        model = description.model
        for attribute in model.attributes():
            owner, _ = model.owner_of(attribute)
            if owner.label != entity.class_name:
                continue
            anchored = current_anchor(model, owner.id, entity)
            if anchored is None:
                continue
            index = entity.index_of((anchored[0].label, anchored[1].label))
            if index is not None:
                columns.append(TrainingColumn(description.name, attribute, description.source.column(attribute), index))
    return columns


def select_reference_columns(columns: Sequence[TrainingColumn], k: int, rng: random.Random) -> List[TrainingColumn]:
    """One randomly chosen reference column per anchor index 1..k."""
    references = []
    for label in range(1, k + 1):
        pool = sorted((c for c in columns if c.label == label), key=lambda c: (c.source, c.name))
        if not pool:
            raise ClassifierError(f"no training column for anchor #{label}")
        references.append(rng.choice(pool))
    return references


def extract_features(name: str, values: Sequence[str], refs: Sequence[TrainingColumn], entity: AmbiguousEntity,
                     kb: Optional[KnowledgeBase] = None, kb_hit_ratio: float = 0.5) -> FeatureVector:
    cells = non_empty(values)
    if not cells:
        raise ClassifierError(f"column '{name}' has no values")
    if len(refs) != entity.k:
        raise ClassifierError(f"expected {entity.k} reference columns, got {len(refs)}")
    numeric = is_numeric(cells)
    sample = numeric_sample(cells) if numeric else None
    names, jac, tfidf, ks, mw, hits = [], [], [], [], [], []
    for (anchor_class, _), ref in zip(entity.anchors, refs):
        names.append(name_similarity(name, anchor_class))
        if numeric:
            ref_sample = numeric_sample(ref.values)
            jac.append(0.0)
            tfidf.append(0.0)
            ks.append(ks_statistic(sample, ref_sample))
            mw.append(mw_statistic(sample, ref_sample))
        else:
            jac.append(jaccard(cells, ref.values))
            tfidf.append(tfidf_cosine(cells, ref.values))
            ks.append(0.0)
            mw.append(0.0)
        if kb is None:
            hits.append(0)
        else:
            category = anchor_name(anchor_class).lower()
            share = sum(kb.contains(category, v) for v in cells) / len(cells)
            hits.append(int(share >= kb_hit_ratio))
    return FeatureVector(tuple(names), tuple(jac), tuple(tfidf), tuple(ks), tuple(mw), tuple(hits))


@dataclass
class RelationshipClassifier:
    entity: AmbiguousEntity
    references: List[TrainingColumn]
    tree: DecisionTreeClassifier
    kb: Optional[KnowledgeBase] = None
    kb_hit_ratio: float = 0.5
    training_size: int = field(default=0)

    def features(self, name: str, values: Sequence[str]) -> FeatureVector:
        return extract_features(name, values, self.references, self.entity, self.kb, self.kb_hit_ratio)

    def predict_index(self, name: str, values: Sequence[str]) -> int:
        return int(self.tree.predict(self.features(name, values).as_array().reshape(1, -1))[0])

    def predict(self, name: str, values: Sequence[str]) -> Anchor:
        return self.entity.anchors[self.predict_index(name, values) - 1]


def train_relationship_classifier(entity: AmbiguousEntity, training: Sequence[TrainingColumn],
                                  kb: Optional[KnowledgeBase] = None, seed: int = 42, max_depth: int = 8,
                                  min_samples_leaf: int = 1, kb_hit_ratio: float = 0.5) -> RelationshipClassifier:
    """Gini decision tree over the feature vectors of every training column."""
    missing = sorted(set(range(1, entity.k + 1)) - {c.label for c in training})
    if missing:
        names = ", ".join(entity.anchors[i - 1][0] for i in missing)
        raise ClassifierError(f"{entity.class_name}: no training column anchored by {names}")
    rng = random.Random(seed)
    references = select_reference_columns(training, entity.k, rng)
    features = np.vstack([
        extract_features(c.name, c.values, references, entity, kb, kb_hit_ratio).as_array() for c in training
    ])
    labels = np.array([c.label for c in training])
    tree = DecisionTreeClassifier(criterion="gini", max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                                  random_state=seed)
    tree.fit(features, labels)
    logger.info(
        f"📚 Trained classifier for {entity.class_name} on {len(training)} columns "
        f"(depth {tree.get_depth()}, {entity.k} anchors)"
    )
    return RelationshipClassifier(entity, references, tree, kb, kb_hit_ratio, len(training))


def train_classifiers(known: Sequence[SourceDescription], kb: Optional[KnowledgeBase] = None, seed: int = 42,
                      max_depth: int = 8, min_samples_leaf: int = 1,
                      kb_hit_ratio: float = 0.5) -> Dict[str, RelationshipClassifier]:
    """One classifier per ambiguous entity; entities lacking anchor coverage are skipped."""
    classifiers = {}
    for entity in find_ambiguous_entities(known):
        columns = build_training_columns(known, entity)
        try:
            classifiers[entity.class_name] = train_relationship_classifier(
                entity, columns, kb, seed, max_depth, min_samples_leaf, kb_hit_ratio
            )
        except ClassifierError as e:
            logger.warning(f"⚠️ Skipping disambiguation of {entity.class_name}: {e}")
    return classifiers


def _link_candidates(model: SemanticModel, anchor: ClassNode, exclude: str, onto: Optional[Ontology],
                     kg: Optional[KnowledgeGraph]) -> List[Edge]:
    others = [n for n in model.class_nodes if n.id not in (exclude, anchor.id)]
    for source in ("kg", "ontology"):
        links = []
        for node in others:
            if source == "kg" and kg is not None:
                outgoing = sorted(p for s, p, o in kg.schema_projection if s == node.label and o == anchor.label)
                incoming = sorted(p for s, p, o in kg.schema_projection if s == anchor.label and o == node.label)
            elif source == "ontology" and onto is not None:
                outgoing = onto.properties_between(node.label, anchor.label)
                incoming = onto.properties_between(anchor.label, node.label)
            else:
                continue
            links += [Edge(node.id, p, anchor.id, OBJECT) for p in outgoing]
            links += [Edge(anchor.id, p, node.id, OBJECT) for p in incoming]
        if links:
            return sorted(links)
    return []


def move_relationship(sd: SemanticModel, attr: str, predicted: Anchor, onto: Optional[Ontology] = None,
                      kg: Optional[KnowledgeGraph] = None) -> SemanticModel:
    """Re-anchor the class node owning `attr` under an instance of the predicted anchor class."""
    anchor_class, label = predicted
    owned = sd.owner_of(attr)
    if owned is None:
        raise ClassifierError(f"attribute '{attr}' is not in the model")
    owner, _ = owned
    incoming = [e for e in sd.incoming(owner.id) if e.label == label]
    if any(sd.node(e.src).label == anchor_class for e in incoming):
        return sd
    if onto is not None and anchor_class not in onto.classes and not sd.instances(anchor_class):
        raise ClassifierError(f"anchor class '{anchor_class}' is neither in the model nor in the ontology")

    reusable = [
        n for n in sd.instances(anchor_class)
        if not any(e.label == label for e in sd.outgoing(n.id))
    ]
    add_nodes, add_edges = [], []
    if reusable:
        anchor = reusable[0]
    else:
        anchor = sd.fresh_class_node(anchor_class)
        add_nodes.append(anchor)
        trial = sd.with_changes(add_class_nodes=[anchor])
        links = _link_candidates(trial, anchor, owner.id, onto, kg)
        if links:
            add_edges.append(links[0])
        else:
            logger.warning(f"⚠️ New anchor {anchor.name} for '{attr}' has no schema link into the model")
    add_edges.append(Edge(anchor.id, label, owner.id, OBJECT))
    moved = sd.with_changes(add_class_nodes=add_nodes, add_edges=add_edges, remove_edges=incoming)
    logger.info(f"🧭 Moved '{attr}': {', '.join(sd.render(e.src) for e in incoming) or '-'} -> {anchor.name}")
    return moved


def disambiguate_model(sd: SemanticModel, source: SourceTable, classifiers: Dict[str, RelationshipClassifier],
                       onto: Optional[Ontology] = None,
                       kg: Optional[KnowledgeGraph] = None) -> Tuple[SemanticModel, List[Dict[str, str]]]:
    """Apply every relevant classifier to the seed; returns the moved model and the moves made."""
    model = sd
    moves = []
    for attribute in sd.attributes():
        owned = model.owner_of(attribute)
        if owned is None:
            continue
        owner, _ = owned
        classifier = classifiers.get(owner.label)
        if classifier is None:
            continue
        anchored = current_anchor(model, owner.id, classifier.entity)
        if anchored is None:
            continue
        predicted = classifier.predict(attribute, source.column(attribute))
        if (anchored[0].label, anchored[1].label) == predicted:
            continue
        model = move_relationship(model, attribute, predicted, onto, kg)
        moves.append({"attribute": attribute, "from": anchored[0].label, "to": predicted[0], "label": predicted[1]})
    return model, moves
