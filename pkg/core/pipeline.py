#!/usr/bin/env python3
"""
🧠 Semantic model pipeline

label → align → seed → disambiguate → correct → mine → evaluate

Every stage can be the last one; artifacts of each stage reached are written
to <output_dir>/<source>/.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from core.alignment import AlignmentGraph, alignment_to_dot, attach_candidate_types, build_alignment_graph
from core.config import PipelineConfig
from core.correction import CorrectionResult, repair_phase_one
from core.disambiguation import KnowledgeBase, disambiguate_model, load_kb, train_classifiers
from core.errors import ConfigError, DataError, PipelineError, StageError
from core.evaluation import ModelScore, score_models
from core.labeling import CandidateTypeSet, Labeler, SemanticType, label_source, load_labeler, mrr, train_labeler
from core.mining import ConstraintMap, MinedModel, add_missing_substructures, load_constraint_map
from core.steiner import CandidateModel, select_seed, top_k_steiner_trees
from models.knowledge_graph import KnowledgeGraph, build_leave_one_out_kg, load_kg
from models.ontology import Ontology, load_ontology
from models.semantic_model import SemanticModel, save_model
from models.source import SourceDescription, SourceTable, load_descriptions

logger = logging.getLogger(__name__)

STAGES = ("label", "align", "seed", "disambiguate", "correct", "mine", "evaluate")


def get_memory_usage() -> float:
    """Resident memory of this process in MB (0 when psutil is missing)."""
    try:
        import psutil
        return psutil.Process().memory_info().rss / (1024 * 1024)
    except ImportError:
        return 0.0


def log_memory_usage(context: str = "") -> float:
    memory_mb = get_memory_usage()
    if memory_mb > 0:
        logger.info(f"💾 Memory usage {context}: {memory_mb:.1f}MB")
    return memory_mb


@dataclass
class PipelineContext:
    """Inputs shared by every run over one dataset."""
    ontology: Ontology
    descriptions: List[SourceDescription] = field(default_factory=list)
    kg: Optional[KnowledgeGraph] = None
    constraint_map: ConstraintMap = field(default_factory=ConstraintMap)
    kb: Optional[KnowledgeBase] = None
    labeler: Optional[Labeler] = None
    _kg_cache: Dict[str, KnowledgeGraph] = field(default_factory=dict, repr=False)

    @classmethod
    def from_config(cls, config: PipelineConfig, descriptions: Optional[Sequence[SourceDescription]] = None,
                    use_labeler_snapshot: bool = False) -> "PipelineContext":
        paths = config.paths
        if paths.ontology is None:
            raise ConfigError("paths.ontology is required")
        onto = load_ontology(paths.ontology)
        if descriptions is None:
            if paths.models is None or paths.sources is None:
                raise ConfigError("paths.models and paths.sources are required")
            descriptions = load_descriptions(paths.models, paths.sources)
        kg = load_kg(paths.kg) if paths.kg else None
        cm = load_constraint_map(paths.constraint_map) if paths.constraint_map else ConstraintMap()
        kb = load_kb(paths.kb_snapshot) if paths.kb_snapshot else None
        labeler = None
        if use_labeler_snapshot and paths.labeler_snapshot and Path(paths.labeler_snapshot).exists():
            labeler = load_labeler(paths.labeler_snapshot)
        return cls(onto, list(descriptions), kg, cm, kb, labeler)

    def description(self, name: str) -> Optional[SourceDescription]:
        return next((d for d in self.descriptions if d.name == name), None)

    def kg_for(self, source_name: str, known: Sequence[SourceDescription]) -> KnowledgeGraph:
        """The configured KG, else every description except `source_name` materialized."""
        if self.kg is not None:
            return self.kg
        if source_name not in self._kg_cache:
            if self.description(source_name) is not None:
                kg = build_leave_one_out_kg(self.descriptions, source_name)
            else:
                kg = KnowledgeGraph({})
                for description in known:
                    kg = kg.union(KnowledgeGraph.materialize(description))
            self._kg_cache[source_name] = kg
        return self._kg_cache[source_name]


@dataclass
class PipelineOutcome:
    source: str
    last_stage: str = ""
    candidates: List[CandidateTypeSet] = field(default_factory=list)
    alignment: Optional[AlignmentGraph] = None
    steiner: List[CandidateModel] = field(default_factory=list)
    seed: Optional[SemanticModel] = None
    moves: List[Dict[str, str]] = field(default_factory=list)
    moved: Optional[SemanticModel] = None
    correction: Optional[CorrectionResult] = None
    mined: List[MinedModel] = field(default_factory=list)
    final: Optional[SemanticModel] = None
    unlabeled: List[str] = field(default_factory=list)
    scores: Optional[ModelScore] = None
    mrr: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    def report(self) -> Dict:
        data = {
            "source": self.source,
            "last_stage": self.last_stage,
            "moves": self.moves,
            "isolated": self.correction.isolated if self.correction else [],
            "unlabeled": self.unlabeled,
            "mrr": self.mrr,
            "timings_ms": self.timings,
            "warnings": self.warnings,
            "mined": [{"rank": i, "frequency": m.frequency} for i, m in enumerate(self.mined, start=1)],
        }
        if self.scores is not None:
            data["scores"] = {
                "precision": self.scores.precision,
                "recall": self.scores.recall,
                "f1": self.scores.f1,
                "empty_prediction": self.scores.empty_prediction,
            }
        return data


class SemanticModelPipeline:
    """Runs the stages for one new source against a set of known sources."""

    def __init__(self, config: PipelineConfig, context: PipelineContext):
        self.config = config
        self.context = context

    def run(self, source: SourceTable, gold: Optional[SemanticModel] = None,
            known: Optional[Sequence[SourceDescription]] = None, stop_after: str = "evaluate",
            write: bool = True) -> PipelineOutcome:
        if stop_after not in STAGES:
            raise ConfigError(f"unknown stage '{stop_after}'; expected one of {', '.join(STAGES)}")
        known = list(known) if known is not None else [d for d in self.context.descriptions if d.name != source.name]
        if not known:
            raise DataError(f"no known source descriptions to learn '{source.name}' from")
        out_dir = Path(self.config.output_dir) / source.name if write else None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
        outcome = PipelineOutcome(source.name)
        attributes = gold.attributes() if gold is not None else source.attribute_names
        log_memory_usage(f"before {source.name}")

        for stage in STAGES[: STAGES.index(stop_after) + 1]:
            started = time.perf_counter()
            try:
                getattr(self, f"_stage_{stage}")(outcome, source, gold, known, attributes, out_dir)
            except (ConfigError, DataError):
                raise
            except PipelineError as e:
                raise StageError(stage, e) from e
            outcome.timings[f"{stage}_ms"] = (time.perf_counter() - started) * 1000
            outcome.last_stage = stage
            logger.debug(f"⏱️ {source.name}/{stage}: {outcome.timings[f'{stage}_ms']:.1f} ms")

        t = outcome.timings
        t["phase_one_ms"] = t.get("disambiguate_ms", 0.0) + t.get("correct_ms", 0.0)
        t["phase_two_ms"] = t.get("mine_ms", 0.0)
        if out_dir is not None:
            self._write_json(outcome, out_dir / "report.json", outcome.report())
        log_memory_usage(f"after {source.name}")
        return outcome

    # ------------------------------------------------------------------ stages

    def _stage_label(self, outcome, source, gold, known, attributes, out_dir):
        cfg = self.config.labeling
        labeler = self.context.labeler
        if labeler is not None and source.name in labeler.sources:
            logger.warning(f"⚠️ Labeler snapshot was trained on '{source.name}', retraining on the known sources")
            labeler = None
        labeler = labeler or train_labeler(known, cfg.numeric_threshold)
        outcome.candidates = label_source(labeler, source, attributes, cfg.top_k)
        if gold is not None:
            expected = [SemanticType(*gold.semantic_type_of(a)) for a in attributes]
            outcome.mrr = mrr(outcome.candidates, expected)
            logger.info(f"🏷️ {source.name}: labeling MRR {outcome.mrr:.3f}")
        if out_dir is not None:
            self._write_json(outcome, out_dir / "01_candidates.json", [c.to_dict() for c in outcome.candidates])

    def _stage_align(self, outcome, source, gold, known, attributes, out_dir):
        graph = build_alignment_graph(known, self.context.ontology, self.config.match_subclasses)
        outcome.alignment = attach_candidate_types(graph, outcome.candidates)
        if out_dir is not None and self.config.dump_alignment:
            path = out_dir / "02_alignment.dot"
            path.write_text(alignment_to_dot(outcome.alignment), encoding="utf-8")
            outcome.artifacts.append(str(path))

    def _stage_seed(self, outcome, source, gold, known, attributes, out_dir):
        cfg = self.config.steiner
        outcome.steiner = top_k_steiner_trees(outcome.alignment, attributes, cfg.k, cfg.max_assignments)
        outcome.seed = select_seed(outcome.steiner)
        outcome.final = outcome.seed
        if out_dir is not None:
            self._write_model(outcome, out_dir / "03_seed.json", outcome.seed)

    def _stage_disambiguate(self, outcome, source, gold, known, attributes, out_dir):
        cfg = self.config.disambiguation
        kg = self.context.kg_for(source.name, known)
        classifiers = train_classifiers(known, self.context.kb, self.config.seed, cfg.max_depth,
                                        cfg.min_samples_leaf, cfg.kb_hit_ratio)
        outcome.moved, outcome.moves = disambiguate_model(outcome.seed, source, classifiers, self.context.ontology, kg)
        outcome.final = outcome.moved
        if out_dir is not None:
            self._write_model(outcome, out_dir / "04_moved.json", outcome.moved)

    def _stage_correct(self, outcome, source, gold, known, attributes, out_dir):
        kg = self.context.kg_for(source.name, known)
        result = repair_phase_one(outcome.moved, source, kg, outcome.candidates, self.config.correction)
        result.moves = outcome.moves
        outcome.correction = result
        outcome.warnings.extend(result.warnings)
        outcome.final = result.model
        if out_dir is not None:
            self._write_model(outcome, out_dir / "05_corrected.json", result.model)
            isolated = {
                "isolated": result.isolated,
                "reduced": {c: r.to_dict() for c, r in sorted(result.reduced.items())},
            }
            self._write_json(outcome, out_dir / "05_isolated.json", isolated)

    def _stage_mine(self, outcome, source, gold, known, attributes, out_dir):
        kg = self.context.kg_for(source.name, known)
        result = outcome.correction
        outcome.mined = add_missing_substructures(result.model, kg, self.context.constraint_map, result.reduced,
                                                  self.config.mining)
        if outcome.mined:
            outcome.final = outcome.mined[0].model
        else:
            outcome.final = result.model
            outcome.warnings.append("no completion found; isolated columns left unlabeled")
            logger.warning(f"⚠️ {source.name}: no completion found for {', '.join(result.isolated)}")
        outcome.unlabeled = sorted(set(attributes) - set(outcome.final.attributes()))
        if out_dir is not None:
            for rank, mined in enumerate(outcome.mined, start=1):
                self._write_model(outcome, out_dir / f"06_mined_{rank}.json", mined.model)
            self._write_model(outcome, out_dir / "final.json", outcome.final)

    def _stage_evaluate(self, outcome, source, gold, known, attributes, out_dir):
        if gold is None:
            logger.info(f"📊 {source.name}: no gold model, skipping evaluation")
            return
        outcome.scores = score_models(gold, outcome.final)
        s = outcome.scores
        logger.info(f"📊 {source.name}: P={s.precision:.3f} R={s.recall:.3f} F1={s.f1:.3f}")

    # ------------------------------------------------------------------ artifacts

    def _write_model(self, outcome: PipelineOutcome, path: Path, model: SemanticModel) -> None:
        save_model(model, path)
        outcome.artifacts.append(str(path))

    def _write_json(self, outcome: PipelineOutcome, path: Path, data) -> None:
        path.write_text(json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
        outcome.artifacts.append(str(path))
