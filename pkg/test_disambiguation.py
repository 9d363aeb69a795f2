"""
Tests for ambiguous-entity detection, similarity features, relationship
classifiers and relationship moves.
"""

import random

import pytest

from conftest import E12, E21, E52, E67, E69, GOLD_EDGES, P4, SEED_ATTRIBUTES
from core.disambiguation import (
    FEATURES_PER_ANCHOR, AmbiguousEntity, KnowledgeBase, TrainingColumn, anchor_name, build_training_columns,
    disambiguate_model, extract_features, find_ambiguous_entities, load_kb, move_relationship, name_similarity,
    name_tokens, select_reference_columns, train_classifiers, train_relationship_classifier,
)
from core.errors import ClassifierError, DataError
from models.semantic_model import Edge, SemanticModel
from models.source import SourceDescription


def _moved_seed():
    edges = [e for e in GOLD_EDGES if e[2] != "E55_Type1"]
    edges.append(("E22_Man-Made_Object1", "P130i_features_are_also_found_on", "E57_Material1"))
    return SemanticModel.build(edges, SEED_ATTRIBUTES)


@pytest.fixture
def time_span_entity(cb_known):
    return find_ambiguous_entities(cb_known)[0]


class TestAmbiguousEntities:
    def test_time_span_found(self, cb_known):
        entities = find_ambiguous_entities(cb_known)
        assert len(entities) == 1
        assert entities[0].class_name == E52
        assert entities[0].anchors == ((E12, P4), (E67, P4), (E69, P4))
        assert entities[0].index_of((E69, P4)) == 3
        assert entities[0].index_of((E21, P4)) is None

    def test_needs_two_anchors(self):
        with pytest.raises(ClassifierError):
            AmbiguousEntity(E52, ((E12, P4),))
        with pytest.raises(ClassifierError):
            AmbiguousEntity(E52, ((E12, P4), (E12, P4)))

    def test_training_columns_labelled_by_anchor(self, cb_known, time_span_entity):
        columns = build_training_columns(cb_known, time_span_entity)
        assert {(c.name, c.label) for c in columns} == {("Date", 1), ("Begin Date", 2), ("Death Date", 3)}

    def test_reference_columns_seeded(self):
        columns = [TrainingColumn("s", f"c{i}", ("1",), 1 + i % 2) for i in range(6)]
        first = select_reference_columns(columns, 2, random.Random(3))
        assert first == select_reference_columns(columns, 2, random.Random(3))
        assert [c.label for c in first] == [1, 2]
        with pytest.raises(ClassifierError, match="anchor #3"):
            select_reference_columns(columns, 3, random.Random(3))


class TestFeatures:
    def test_anchor_names(self):
        assert anchor_name(E67) == "Birth"
        assert anchor_name("P82a_begin_of_the_begin") == "begin_of_the_begin"
        assert name_tokens("BeginDate of_Death") == {"begin", "date", "of", "death"}
        assert name_similarity("Death Date", E69) == pytest.approx(0.5)
        assert name_similarity("Date", E12) == 0.0

    def test_numeric_column_uses_distribution_features(self, cb_known, time_span_entity):
        refs = sorted(build_training_columns(cb_known, time_span_entity), key=lambda c: c.label)
        vector = extract_features("Begin Date", refs[1].values, refs, time_span_entity)
        assert vector.ks_statistic == (1.0, 0.0, 1.0)
        assert vector.jaccard == (0.0, 0.0, 0.0)
        assert vector.tfidf_cosine == (0.0, 0.0, 0.0)
        assert vector.kb_hit == (0, 0, 0)
        assert len(vector.as_array()) == FEATURES_PER_ANCHOR * time_span_entity.k

    def test_text_column_uses_overlap_features(self):
        entity = AmbiguousEntity("E39_Actor", (("E12_Production", "P14"), ("E8_Acquisition", "P14")))
        refs = [
            TrainingColumn("s", "Maker", ("Claude Monet", "Edgar Degas"), 1),
            TrainingColumn("s", "Buyer", ("Louvre", "Tate"), 2),
        ]
        vector = extract_features("Painter", ["Claude Monet", "Mary Cassatt"], refs, entity)
        assert vector.jaccard == (pytest.approx(1 / 3), 0.0)
        assert vector.tfidf_cosine[0] > 0
        assert vector.tfidf_cosine[1] == 0.0
        assert vector.ks_statistic == (0.0, 0.0)
        assert vector.name_similarity == (0.0, 0.0)

    def test_kb_hit(self):
        entity = AmbiguousEntity("E39_Actor", (("E21_Person", "P14"), ("E74_Group", "P14")))
        refs = [TrainingColumn("s", "a", ("x",), 1), TrainingColumn("s", "b", ("y",), 2)]
        kb = KnowledgeBase({"Person": frozenset({"claude monet", "edgar degas"})})
        vector = extract_features("Maker", ["Claude Monet", "Edgar Degas", "Tate"], refs, entity, kb, 0.5)
        assert vector.kb_hit == (1, 0)
        vector = extract_features("Maker", ["Claude Monet", "Tate", "Louvre"], refs, entity, kb, 0.5)
        assert vector.kb_hit == (0, 0)

    def test_empty_column_rejected(self, cb_known, time_span_entity):
        refs = sorted(build_training_columns(cb_known, time_span_entity), key=lambda c: c.label)
        with pytest.raises(ClassifierError, match="no values"):
            extract_features("Blank", ["", ""], refs, time_span_entity)


class TestKnowledgeBaseFile:
    def test_load(self, tmp_path):
        path = tmp_path / "kb.tsv"
        path.write_text("# authority snapshot\nPerson\tClaude Monet\n\nperson\tEdgar Degas\nGroup\tTate\n", encoding="utf-8")
        kb = load_kb(path)
        assert len(kb) == 3
        assert kb.contains("PERSON", " claude monet ") == 1
        assert kb.contains("Group", "Claude Monet") == 0

    def test_bad_line(self, tmp_path):
        path = tmp_path / "kb.tsv"
        path.write_text("Person\tClaude Monet\nno tab here\n", encoding="utf-8")
        with pytest.raises(DataError) as info:
            load_kb(path)
        assert info.value.line == 2

    def test_missing(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_kb(tmp_path / "kb.tsv")


class TestClassifier:
    def test_predicts_cb_time_spans(self, cb_known, cb_source, time_span_entity):
        columns = build_training_columns(cb_known, time_span_entity)
        classifier = train_relationship_classifier(time_span_entity, columns, seed=42)
        assert classifier.training_size == 3
        assert classifier.predict("Date", cb_source.column("Date")) == (E12, P4)
        assert classifier.predict("Begin Date", cb_source.column("Begin Date")) == (E67, P4)
        assert classifier.predict("Death Date", cb_source.column("Death Date")) == (E69, P4)

    def test_missing_anchor_coverage(self, cb_known, time_span_entity):
        columns = [c for c in build_training_columns(cb_known, time_span_entity) if c.label != 3]
        with pytest.raises(ClassifierError, match=E69):
            train_relationship_classifier(time_span_entity, columns)

    def test_train_classifiers_keyed_by_class(self, cb_known):
        classifiers = train_classifiers(cb_known, seed=7)
        assert list(classifiers) == [E52]

    def test_train_classifiers_skips_uncovered_entities(self, cb_known):
        npg, gt = cb_known
        partial = SemanticModel.build(
            [("E12_Production1", P4, "E52_Time-Span1"), ("E12_Production1", "P14_carried_out_by", "E21_Person1"),
             ("E21_Person1", "P98i_was_born", "E67_Birth1"), ("E67_Birth1", P4, "E52_Time-Span2")],
            [("E52_Time-Span1", "P82_at_some_time_within", "Date")],
        )
        assert train_classifiers([SourceDescription(npg.source, partial), gt]) == {}


class TestMoveRelationship:
    def test_moves_under_fresh_anchor_linked_from_kg(self, cb_seed, cb_kg):
        moved = move_relationship(cb_seed, "Begin Date", (E67, P4), kg=cb_kg)
        assert moved.node("E67_Birth1").label == E67
        triples = {(moved.render(e.src), e.label, moved.render(e.dst)) for e in moved.object_edges()}
        assert ("E21_Person1", "P98i_was_born", "E67_Birth1") in triples
        assert ("E67_Birth1", P4, "E52_Time-Span2") in triples
        assert ("E12_Production1", P4, "E52_Time-Span2") not in triples
        assert moved.is_connected()

    def test_ontology_used_without_kg(self, cb_seed, cb_ontology, cb_kg):
        assert move_relationship(cb_seed, "Death Date", (E69, P4), onto=cb_ontology) == \
            move_relationship(cb_seed, "Death Date", (E69, P4), kg=cb_kg)

    def test_already_anchored_is_unchanged(self, cb_seed, cb_kg):
        assert move_relationship(cb_seed, "Date", (E12, P4), kg=cb_kg) is cb_seed

    def test_reuses_free_anchor_instance(self, cb_gold, cb_kg):
        rewired = cb_gold.with_changes(
            remove_edges=[Edge("E67_Birth1", P4, "E52_Time-Span2")],
            add_edges=[Edge("E12_Production1", P4, "E52_Time-Span2")],
        )
        moved = move_relationship(rewired, "Begin Date", (E67, P4), kg=cb_kg)
        assert len(moved.instances(E67)) == 1
        assert moved == cb_gold

    def test_unknown_anchor_class(self, cb_seed, cb_ontology):
        with pytest.raises(ClassifierError, match="neither"):
            move_relationship(cb_seed, "Begin Date", ("E5_Event", P4), onto=cb_ontology)

    def test_unknown_attribute(self, cb_seed):
        with pytest.raises(ClassifierError, match="not in the model"):
            move_relationship(cb_seed, "Nope", (E67, P4))


def test_disambiguate_cb_seed(cb_known, cb_seed, cb_source, cb_kg, cb_ontology):
    classifiers = train_classifiers(cb_known, seed=42)
    moved, moves = disambiguate_model(cb_seed, cb_source, classifiers, cb_ontology, cb_kg)
    assert moves == [
        {"attribute": "Begin Date", "from": E12, "to": E67, "label": P4},
        {"attribute": "Death Date", "from": E12, "to": E69, "label": P4},
    ]
    assert moved == _moved_seed()
