#!/usr/bin/env python3
"""
📊 Evaluation

- Precision / recall / F1 of a predicted model against the gold model under
  the best class-preserving node mapping
- Dataset-level runs with seeded train-set draws and a leave-one-out
  knowledge graph per test source
- JSON report and a plain-text table
"""

import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field
from itertools import permutations, product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.errors import DataError
from models.semantic_model import SemanticModel, model_triples

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10_000

# Published results with two known models, logged next to computed numbers
REFERENCE_RESULTS = {
    "museum-edm": {"f1": 0.917, "mrr": 0.907},
    "museum-crm": {"f1": 0.888, "mrr": 0.937},
    "weapon-lod": {"f1": 0.852, "mrr": 0.879},
}

Mapping = Dict[str, Optional[str]]


@dataclass(frozen=True)
class ModelScore:
    precision: float
    recall: float
    f1: float
    matched: int = 0
    empty_prediction: bool = False


def _mapped_triples(pred: SemanticModel, mapping: Mapping, gold: SemanticModel) -> set:
    names = {}
    for node in pred.class_nodes:
        target = mapping.get(node.id)
        names[node.id] = gold.render(target) if target is not None else f"{node.name}?unmapped:{node.id}"
    for node in pred.data_nodes:
        names[node.id] = node.attribute
    return {(names[e.src], e.label, names[e.dst]) for e in pred.edges}


def _score(gold_triples: set, pred: SemanticModel, mapping: Mapping, gold: SemanticModel) -> int:
    return len(gold_triples & _mapped_triples(pred, mapping, gold))


def _class_groups(gold: SemanticModel, pred: SemanticModel) -> List[Tuple[List[str], List[Optional[str]]]]:
    groups = []
    for label in sorted(pred.class_labels()):
        pred_ids = sorted(n.id for n in pred.instances(label))
        gold_ids: List[Optional[str]] = sorted(n.id for n in gold.instances(label))
        gold_ids += [None] * max(0, len(pred_ids) - len(gold_ids))
        groups.append((pred_ids, gold_ids))
    return groups


def _assignment_count(groups) -> int:
    total = 1
    for pred_ids, gold_ids in groups:
        total *= math.perm(len(gold_ids), len(pred_ids))
    return total


def best_mapping(gold: SemanticModel, pred: SemanticModel) -> Mapping:
    """Class-preserving injective map from pred class nodes to gold class nodes (None = unmapped)
    maximizing the shared triples."""
    groups = _class_groups(gold, pred)
    gold_triples = model_triples(gold)
    if _assignment_count(groups) <= EXHAUSTIVE_LIMIT:
        best, best_score = None, -1
        # padding with None repeats assignments; keep the first of each
        per_group = [list(dict.fromkeys(permutations(gold_ids, len(pred_ids)))) for pred_ids, gold_ids in groups]
        for choice in product(*per_group):
            mapping = {}
            for (pred_ids, _), images in zip(groups, choice):
                mapping.update(zip(pred_ids, images))
            score = _score(gold_triples, pred, mapping, gold)
            if score > best_score:
                best, best_score = mapping, score
        return best if best is not None else {}
    return _assignment_mapping(groups, gold_triples, gold, pred)


def _assignment_mapping(groups, gold_triples: set, gold: SemanticModel, pred: SemanticModel) -> Mapping:
    """Coordinate ascent: re-solve one class at a time as a linear assignment given the rest."""
    mapping: Mapping = {}
    for pred_ids, gold_ids in groups:
        mapping.update(zip(pred_ids, gold_ids))
    current = _score(gold_triples, pred, mapping, gold)
    for _ in range(10):
        improved = False
        for pred_ids, gold_ids in groups:
            gain = np.zeros((len(pred_ids), len(gold_ids)))
            for i, p in enumerate(pred_ids):
                for j, g in enumerate(gold_ids):
                    trial = dict(mapping)
                    for other in pred_ids:
                        trial[other] = None
                    trial[p] = g
                    gain[i, j] = _score(gold_triples, pred, trial, gold)
            rows, cols = linear_sum_assignment(-gain)
            candidate = dict(mapping)
            for i, j in zip(rows, cols):
                candidate[pred_ids[i]] = gold_ids[j]
            score = _score(gold_triples, pred, candidate, gold)
            if score > current:
                mapping, current, improved = candidate, score, True
        if not improved:
            break
    return mapping


def score_models(gold: SemanticModel, pred: SemanticModel) -> ModelScore:
    gold_triples = model_triples(gold)
    if not pred.edges:
        return ModelScore(0.0, 0.0, 0.0, 0, True)
    mapping = best_mapping(gold, pred)
    mapped = _mapped_triples(pred, mapping, gold)
    matched = len(gold_triples & mapped)
    precision = matched / len(mapped) if mapped else 0.0
    recall = matched / len(gold_triples) if gold_triples else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ModelScore(precision, recall, f1, matched, False)


def precision_recall(gold: SemanticModel, pred: SemanticModel) -> Tuple[float, float, float]:
    """(precision, recall, f1) over triples; an empty prediction scores 0 with a warning."""
    score = score_models(gold, pred)
    if score.empty_prediction:
        logger.warning("⚠️ Empty prediction: precision undefined, reported as 0")
    return score.precision, score.recall, score.f1


# ---------------------------------------------------------------------- dataset runs


@dataclass
class SourceResult:
    source: str
    repeat: int
    train: List[str]
    precision: float
    recall: float
    f1: float
    mrr: Optional[float] = None
    phase_one_ms: float = 0.0
    phase_two_ms: float = 0.0
    empty_prediction: bool = False
    warnings: List[str] = field(default_factory=list)


@dataclass
class EvalReport:
    results: List[SourceResult] = field(default_factory=list)
    dataset: Optional[str] = None

    def _mean(self, name: str) -> float:
        values = [getattr(r, name) for r in self.results if getattr(r, name) is not None]
        return float(np.mean(values)) if values else 0.0

    @property
    def precision(self) -> float:
        return self._mean("precision")

    @property
    def recall(self) -> float:
        return self._mean("recall")

    @property
    def f1(self) -> float:
        return self._mean("f1")

    @property
    def mrr(self) -> float:
        return self._mean("mrr")

    @property
    def phase_one_ms(self) -> float:
        return self._mean("phase_one_ms")

    @property
    def phase_two_ms(self) -> float:
        return self._mean("phase_two_ms")

    def summary(self) -> Dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mrr": self.mrr,
            "phase_one_ms": self.phase_one_ms,
            "phase_two_ms": self.phase_two_ms,
        }

    def to_json(self) -> str:
        data = {"dataset": self.dataset, "summary": self.summary(), "results": [asdict(r) for r in self.results]}
        if self.dataset in REFERENCE_RESULTS:
            data["reference"] = REFERENCE_RESULTS[self.dataset]
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def format_report_table(report: EvalReport) -> str:
    header = f"{'source':<20} {'rep':>3} {'P':>6} {'R':>6} {'F1':>6} {'MRR':>6} {'I ms':>9} {'II ms':>9}"
    lines = [header, "-" * len(header)]
    for r in report.results:
        mrr = f"{r.mrr:.3f}" if r.mrr is not None else "-"
        lines.append(
            f"{r.source:<20} {r.repeat:>3} {r.precision:>6.3f} {r.recall:>6.3f} {r.f1:>6.3f} {mrr:>6} "
            f"{r.phase_one_ms:>9.1f} {r.phase_two_ms:>9.1f}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'mean':<20} {'':>3} {report.precision:>6.3f} {report.recall:>6.3f} {report.f1:>6.3f} "
        f"{report.mrr:>6.3f} {report.phase_one_ms:>9.1f} {report.phase_two_ms:>9.1f}"
    )
    reference = REFERENCE_RESULTS.get(report.dataset or "")
    if reference:
        lines.append(f"{'reference':<20} {'':>3} {'':>6} {'':>6} {reference['f1']:>6.3f} {reference['mrr']:>6.3f}")
    return "\n".join(lines) + "\n"


def draw_train_sets(names: Sequence[str], repeats: int, min_train: int, max_train: int, seed: int) -> List[List[str]]:
    """One seeded train-set draw per repeat; at least one source is always left for testing."""
    names = sorted(names)
    draws = []
    for repeat in range(repeats):
        rng = random.Random(seed + repeat)
        size = rng.randint(min_train, min(max_train, len(names) - 1))
        draws.append(sorted(rng.sample(names, size)))
    return draws


def evaluate_dataset(descriptions, config, context=None) -> EvalReport:
    """Repeat: draw known sources, run the pipeline on every other source, score it."""
    from core.pipeline import PipelineContext, SemanticModelPipeline

    if len(descriptions) < 3:
        raise DataError(f"evaluation needs at least 3 source descriptions, got {len(descriptions)}")
    ev = config.evaluation
    if ev.min_train > len(descriptions) - 1:
        raise DataError(f"cannot train on {ev.min_train} sources and still test with {len(descriptions)}")
    context = context or PipelineContext.from_config(config, descriptions)
    report = EvalReport(dataset=ev.reference_dataset)
    by_name = {d.name: d for d in descriptions}
    for repeat, train in enumerate(draw_train_sets(by_name, ev.repeats, ev.min_train, ev.max_train, config.seed)):
        known = [by_name[n] for n in train]
        for name in sorted(set(by_name) - set(train)):
            pipeline = SemanticModelPipeline(config, context)
            outcome = pipeline.run(by_name[name].source, gold=by_name[name].model, known=known, write=False)
            score = outcome.scores or ModelScore(0.0, 0.0, 0.0, 0, True)
            report.results.append(SourceResult(
                name, repeat, train, score.precision, score.recall, score.f1, outcome.mrr,
                outcome.timings.get("phase_one_ms", 0.0), outcome.timings.get("phase_two_ms", 0.0),
                score.empty_prediction, list(outcome.warnings),
            ))
            logger.info(f"📊 {name} (repeat {repeat}): P={score.precision:.3f} R={score.recall:.3f} F1={score.f1:.3f}")
    reference = REFERENCE_RESULTS.get(ev.reference_dataset or "")
    if reference:
        logger.info(f"📊 Mean F1 {report.f1:.3f} (reference {reference['f1']}), MRR {report.mrr:.3f} (reference {reference['mrr']})")
    else:
        logger.info(f"📊 Mean P={report.precision:.3f} R={report.recall:.3f} F1={report.f1:.3f}")
    return report
