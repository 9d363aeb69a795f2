"""
Tests for model scoring, best node mapping and evaluation reports.
"""

import json
import logging
import random
from itertools import permutations, product

import pytest

import core.evaluation as evaluation
from conftest import GOLD_ATTRIBUTES, GOLD_EDGES
from core.config import PipelineConfig
from core.errors import DataError
from core.evaluation import (
    EvalReport, SourceResult, best_mapping, draw_train_sets, evaluate_dataset, format_report_table,
    precision_recall, score_models,
)
from models.semantic_model import SemanticModel, model_triples


def _swap(name, a, b):
    return b if name == a else a if name == b else name


def _renamed(a, b):
    edges = [(_swap(s, a, b), p, _swap(d, a, b)) for s, p, d in GOLD_EDGES]
    attributes = [(_swap(o, a, b), p, c) for o, p, c in GOLD_ATTRIBUTES]
    return SemanticModel.build(edges, attributes)


def _star(spokes):
    edges = [("Root1", f"p{i}", f"X{letter}1") for i, letter in enumerate("ABCDEFGHIJ"[:spokes], start=1)]
    return SemanticModel.build(edges, [("Root1", "name", "col")])


def _random_model(rng, attributes):
    names = [f"{cls}{i}" for cls in ("A", "B") for i in range(1, rng.randint(1, 3) + 1)]
    edges = set()
    for _ in range(rng.randint(1, 5)):
        s, d = rng.sample(names, 2) if len(names) > 1 else (names[0], names[0])
        if s != d:
            edges.add((s, rng.choice(("p", "q")), d))
    owned = [(rng.choice(names), rng.choice(("u", "v")), a) for a in attributes]
    return SemanticModel.build(sorted(edges), owned, classes=names)


def _oracle_matched(gold, pred):
    """Max shared triples over every class-preserving injective mapping, by enumeration."""
    gold_triples = model_triples(gold)
    labels = sorted(pred.class_labels())
    per_label = []
    for label in labels:
        pred_ids = sorted(n.id for n in pred.instances(label))
        targets = [n.id for n in gold.instances(label)] + [None] * len(pred_ids)
        per_label.append([dict(zip(pred_ids, image)) for image in permutations(targets, len(pred_ids))])
    best = 0
    for parts in product(*per_label):
        mapping = {}
        for part in parts:
            mapping.update(part)
        renamed = set()
        for e in pred.edges:
            src = mapping.get(e.src)
            src_name = gold.render(src) if src else f"?{e.src}"
            if pred.is_class(e.dst):
                dst = mapping.get(e.dst)
                dst_name = gold.render(dst) if dst else f"?{e.dst}"
            else:
                dst_name = pred.render(e.dst)
            renamed.add((src_name, e.label, dst_name))
        best = max(best, len(gold_triples & renamed))
    return best


class TestScoreModels:
    def test_identical_models(self, cb_gold):
        score = score_models(cb_gold, cb_gold)
        assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)
        assert score.matched == 17

    def test_degraded_prediction(self):
        gold = SemanticModel.build(
            [("A1", "p", "B1"), ("A1", "q", "C1")],
            [("B1", "v", "colB"), ("C1", "w", "colC")],
        )
        pred = SemanticModel.build(
            [("A1", "p", "B1"), ("A1", "r", "D1"), ("A1", "s", "E1")],
            [("B1", "v", "colB"), ("D1", "w", "colC")],
        )
        precision, recall, f1 = precision_recall(gold, pred)
        assert precision == pytest.approx(0.4)
        assert recall == pytest.approx(0.5)
        assert f1 == pytest.approx(2 * 0.4 * 0.5 / 0.9)

    def test_one_of_ten_edges_missing(self):
        gold = _star(9)
        pred = gold.with_changes(remove_nodes=["XI1"])
        precision, recall, _ = precision_recall(gold, pred)
        assert precision == 1.0
        assert recall == pytest.approx(0.9)

    def test_swapped_instances_recovered(self, cb_gold):
        swapped = _renamed("E52_Time-Span1", "E52_Time-Span2")
        assert model_triples(swapped) != model_triples(cb_gold)
        mapping = best_mapping(cb_gold, swapped)
        assert mapping["E52_Time-Span1"] == "E52_Time-Span2"
        assert precision_recall(cb_gold, swapped) == (1.0, 1.0, 1.0)

    def test_assignment_search_used_past_limit(self, cb_gold, monkeypatch):
        monkeypatch.setattr(evaluation, "EXHAUSTIVE_LIMIT", 0)
        swapped = _renamed("E52_Time-Span2", "E52_Time-Span3")
        assert precision_recall(cb_gold, swapped) == (1.0, 1.0, 1.0)

    def test_empty_prediction_flagged(self, cb_gold, caplog):
        score = score_models(cb_gold, SemanticModel())
        assert score.empty_prediction
        with caplog.at_level(logging.WARNING):
            assert precision_recall(cb_gold, SemanticModel()) == (0.0, 0.0, 0.0)
        assert "Empty prediction" in caplog.text

    def test_disjoint_models_score_zero(self):
        gold = SemanticModel.build([("A1", "p", "B1")])
        pred = SemanticModel.build([("C1", "p", "D1")])
        assert precision_recall(gold, pred) == (0.0, 0.0, 0.0)

    def test_best_mapping_matches_permutation_oracle(self):
        rng = random.Random(7)
        attributes = ["c1", "c2", "c3"]
        for _ in range(60):
            gold = _random_model(rng, attributes)
            pred = _random_model(rng, attributes)
            assert score_models(gold, pred).matched == _oracle_matched(gold, pred)

    def test_symmetric_under_renaming(self):
        rng = random.Random(11)
        attributes = ["c1", "c2"]
        for _ in range(20):
            gold = _random_model(rng, attributes)
            pred = _random_model(rng, attributes)
            a_nodes = [n.id for n in pred.instances("A")]
            if len(a_nodes) < 2:
                continue
            swap = {a_nodes[0]: a_nodes[1], a_nodes[1]: a_nodes[0]}
            renamed = SemanticModel.build(
                [(swap.get(pred.render(e.src), pred.render(e.src)), e.label,
                  swap.get(pred.render(e.dst), pred.render(e.dst))) for e in pred.object_edges()],
                [(swap.get(pred.render(e.src), pred.render(e.src)), e.label, pred.render(e.dst))
                 for e in pred.data_edges()],
                classes=[n.id for n in pred.class_nodes],
            )
            assert precision_recall(gold, renamed) == precision_recall(gold, pred)


class TestReports:
    def _report(self, dataset=None):
        return EvalReport([
            SourceResult("s1", 0, ["s2", "s3"], 1.0, 0.5, 2 / 3, 0.8, 10.0, 30.0),
            SourceResult("s2", 0, ["s1", "s3"], 0.5, 0.5, 0.5, None, 20.0, 10.0),
        ], dataset)

    def test_means_skip_missing_values(self):
        report = self._report()
        assert report.precision == pytest.approx(0.75)
        assert report.mrr == pytest.approx(0.8)
        assert report.phase_one_ms == pytest.approx(15.0)

    def test_json_carries_reference(self):
        data = json.loads(self._report("museum-edm").to_json())
        assert data["reference"] == {"f1": 0.917, "mrr": 0.907}
        assert data["summary"]["recall"] == pytest.approx(0.5)
        assert [r["source"] for r in data["results"]] == ["s1", "s2"]

    def test_table_lists_every_run(self):
        table = format_report_table(self._report("museum-crm"))
        lines = table.splitlines()
        assert lines[2].startswith("s1")
        assert lines[3].split()[5] == "-"
        assert lines[-1].startswith("reference")


class TestDrawTrainSets:
    def test_seeded_and_bounded(self):
        names = ["s1", "s2", "s3", "s4", "s5"]
        first = draw_train_sets(names, 3, 2, 3, seed=42)
        assert first == draw_train_sets(list(reversed(names)), 3, 2, 3, seed=42)
        for train in first:
            assert 2 <= len(train) <= 3
            assert train == sorted(train)

    def test_always_leaves_a_test_source(self):
        for train in draw_train_sets(["a", "b", "c"], 5, 2, 10, seed=1):
            assert len(train) == 2


def test_evaluate_dataset_needs_three_sources(cb_known):
    with pytest.raises(DataError, match="at least 3"):
        evaluate_dataset(cb_known, PipelineConfig())
