#!/usr/bin/env python3
"""
🧠 SemMap - semantic model learning for new data sources

Seeds a semantic model for a new source from known source descriptions
(labeling, alignment graph, Steiner tree), then repairs it against a
knowledge graph (disambiguation, incorrect-relationship removal, mining of
missing substructures).

    python main.py pipeline --config data/config.toml --source s3
    python main.py mine --config data/config.toml --source new.csv --sigma 5
    python main.py evaluate --config data/config.toml
    python main.py make-fixture --output data
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

STAGE_COMMANDS = ("align", "seed", "disambiguate", "correct", "mine")


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        level=level
    )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, help="random seed (default 42)")
    parser.add_argument("--sigma", help="number of mined models kept, or 'unbounded'")
    parser.add_argument("--eta", type=float, help="confidence-ratio threshold of type reduction")
    parser.add_argument("--min-confidence", type=float, help="confidence floor of type reduction")
    parser.add_argument("--constraint-map", help="JSON map of class -> maximum instance count")
    parser.add_argument("--kb-snapshot", help="TSV knowledge-base snapshot (category, value)")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--dump-alignment", action="store_true", help="write the alignment graph as DOT")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semmap", description="Learn and repair semantic models of data sources")
    sub = parser.add_subparsers(dest="command", required=True)

    label = sub.add_parser("label", help="predict candidate semantic types")
    _add_common(label)
    label.add_argument("--source", help="dataset source name or CSV path (default: every dataset source)")

    for name in STAGE_COMMANDS + ("pipeline",):
        stage = sub.add_parser(name, help=f"run the pipeline through '{name}'" if name != "pipeline" else "run every stage")
        _add_common(stage)
        stage.add_argument("--source", required=True, help="dataset source name or CSV path")
        stage.add_argument("--gold", help="gold semantic model JSON (scored after the last stage)")

    evaluate = sub.add_parser("evaluate", help="repeated leave-one-out evaluation over the dataset")
    _add_common(evaluate)

    fixture = sub.add_parser("make-fixture", help="generate a self-verified synthetic dataset")
    fixture.add_argument("--spec", help="fixture spec JSON (default: built-in three-source spec)")
    fixture.add_argument("--output", required=True, help="directory to write")
    fixture.add_argument("-v", "--verbose", action="store_true")
    fixture.add_argument("-q", "--quiet", action="store_true")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "seed": args.seed,
        "mining.sigma": args.sigma,
        "correction.eta_threshold": args.eta,
        "correction.min_confidence": args.min_confidence,
        "paths.constraint_map": args.constraint_map,
        "paths.kb_snapshot": args.kb_snapshot,
        "output_dir": args.output,
        "dump_alignment": True if args.dump_alignment else None,
    }


def run(args: argparse.Namespace) -> Dict[str, Any]:
    from core.config import load_config
    from core.errors import PipelineError, exit_code_for

    if args.command == "make-fixture":
        from handlers.fixture_commands import cmd_make_fixture
        return cmd_make_fixture(args.output, args.spec)

    from handlers.pipeline_commands import cmd_evaluate, cmd_label, cmd_pipeline

    try:
        config = load_config(args.config, overrides_from_args(args))
    except PipelineError as e:
        logger.error(f"❌ {e}")
        return {"success": False, "error": str(e), "exit_code": exit_code_for(e)}

    if args.command == "label":
        return cmd_label(config, args.source)
    if args.command == "evaluate":
        return cmd_evaluate(config)
    stop_after = "evaluate" if args.command == "pipeline" else args.command
    return cmd_pipeline(config, args.source, args.gold, stop_after)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    result = run(args)
    if not result.get("success"):
        print(f"error: {result.get('error')}", file=sys.stderr)
        return result.get("exit_code", 4)
    if "table" in result:
        print(result["table"], end="")
    elif args.command == "pipeline" and result.get("report", {}).get("scores"):
        print(json.dumps(result["report"]["scores"], indent=2))
    return result.get("exit_code", 0)


if __name__ == "__main__":
    sys.exit(main())
