"""
🧠 Pipeline command handlers

Handles the label, align, seed, disambiguate, correct, mine, pipeline and
evaluate commands. Every handler returns a result dict with `success`,
`exit_code` and, on failure, `error`.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from core.config import PipelineConfig
from core.errors import EXIT_OK, ConfigError, PipelineError, exit_code_for
from core.evaluation import evaluate_dataset, format_report_table
from core.labeling import save_labeler, train_labeler
from core.pipeline import STAGES, PipelineContext, SemanticModelPipeline, log_memory_usage
from models.semantic_model import SemanticModel, load_model
from models.source import SourceTable, load_source_csv

logger = logging.getLogger(__name__)


def _failure(error: BaseException) -> Dict[str, Any]:
    code = exit_code_for(error)
    if isinstance(error, PipelineError):
        logger.error(f"❌ {error}")
    else:
        logger.exception(f"❌ Unexpected error: {error}")
    return {"success": False, "error": str(error), "exit_code": code}


def _resolve_source(context: PipelineContext, source: str,
                    gold_path: Optional[str] = None) -> Tuple[SourceTable, Optional[SemanticModel]]:
    """A dataset source by name (its model is the gold), or a CSV path with an optional gold model file."""
    gold = load_model(gold_path) if gold_path else None
    description = context.description(source)
    if description is not None:
        return description.source, gold or description.model
    path = Path(source)
    if path.suffix.lower() == ".csv" and path.exists():
        return load_source_csv(path), gold
    known = ", ".join(d.name for d in context.descriptions) or "none"
    raise ConfigError(f"unknown source '{source}' (dataset sources: {known})")


def cmd_pipeline(config: PipelineConfig, source: str, gold_path: Optional[str] = None,
                 stop_after: str = "evaluate") -> Dict[str, Any]:
    """Run the stages up to `stop_after` for one source and persist their artifacts."""
    try:
        if stop_after not in STAGES:
            raise ConfigError(f"unknown stage '{stop_after}'")
        config.validate()
        context = PipelineContext.from_config(config, use_labeler_snapshot=True)
        table, gold = _resolve_source(context, source, gold_path)
        outcome = SemanticModelPipeline(config, context).run(table, gold=gold, stop_after=stop_after)
        result = {
            "success": True,
            "exit_code": EXIT_OK,
            "source": table.name,
            "stage": outcome.last_stage,
            "output_dir": str(Path(config.output_dir) / table.name),
            "artifacts": outcome.artifacts,
            "warnings": outcome.warnings,
            "report": outcome.report(),
        }
        logger.info(f"✅ {table.name}: ran through '{outcome.last_stage}', {len(outcome.artifacts)} artifacts written")
        return result
    except Exception as e:
        return _failure(e)


def cmd_label(config: PipelineConfig, source: Optional[str] = None) -> Dict[str, Any]:
    """Label one source, or every dataset source against the others; saves a labeler snapshot if configured."""
    try:
        config.validate()
        context = PipelineContext.from_config(config)
        names = [source] if source else [d.name for d in context.descriptions]
        if not names:
            raise ConfigError(f"no sources found in {config.paths.sources}")
        pipeline = SemanticModelPipeline(config, context)
        scores = {}
        for name in names:
            table, gold = _resolve_source(context, name)
            outcome = pipeline.run(table, gold=gold, stop_after="label")
            scores[table.name] = outcome.mrr
        if config.paths.labeler_snapshot:
            save_labeler(train_labeler(context.descriptions, config.labeling.numeric_threshold),
                         config.paths.labeler_snapshot)
        rated = [v for v in scores.values() if v is not None]
        mean = sum(rated) / len(rated) if rated else None
        if mean is not None:
            logger.info(f"🏷️ Mean labeling MRR over {len(rated)} sources: {mean:.3f}")
        return {"success": True, "exit_code": EXIT_OK, "mrr": scores, "mean_mrr": mean}
    except Exception as e:
        return _failure(e)


def cmd_evaluate(config: PipelineConfig) -> Dict[str, Any]:
    """Dataset evaluation; writes evaluation.json and evaluation.txt to the output directory."""
    try:
        config.validate()
        context = PipelineContext.from_config(config)
        log_memory_usage("before evaluation")
        report = evaluate_dataset(context.descriptions, config, context)
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        table = format_report_table(report)
        (out_dir / "evaluation.json").write_text(report.to_json(), encoding="utf-8")
        (out_dir / "evaluation.txt").write_text(table, encoding="utf-8")
        log_memory_usage("after evaluation")
        return {
            "success": True,
            "exit_code": EXIT_OK,
            "summary": report.summary(),
            "table": table,
            "files": [str(out_dir / "evaluation.json"), str(out_dir / "evaluation.txt")],
        }
    except Exception as e:
        return _failure(e)
