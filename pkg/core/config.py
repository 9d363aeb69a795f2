#!/usr/bin/env python3
"""
⚙️ Pipeline configuration

Layered, lowest precedence first:
1. dataclass defaults
2. TOML config file (relative paths resolve against the file's directory)
3. environment variables (a `.env` file is loaded with python-dotenv)
4. command-line overrides
"""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from core.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class PathsConfig:
    ontology: Optional[Path] = None
    models: Optional[Path] = None
    sources: Optional[Path] = None
    # No kg file means a leave-one-out KG is built per held-out source
    kg: Optional[Path] = None
    constraint_map: Optional[Path] = None
    kb_snapshot: Optional[Path] = None
    labeler_snapshot: Optional[Path] = None


@dataclass(frozen=True)
class LabelingConfig:
    top_k: int = 4
    numeric_threshold: float = 0.8


@dataclass(frozen=True)
class SteinerConfig:
    k: int = 10
    max_assignments: int = 256


@dataclass(frozen=True)
class DisambiguationConfig:
    max_depth: int = 8
    min_samples_leaf: int = 1
    kb_hit_ratio: float = 0.5


@dataclass(frozen=True)
class TypeReductionConfig:
    eta_threshold: float = 3.0
    min_confidence: float = 0.05
    max_path_length: int = 2

    def validate(self) -> None:
        if not self.eta_threshold > 1:
            raise ConfigError(f"eta_threshold must be > 1, got {self.eta_threshold}")
        if not 0 < self.min_confidence < 1:
            raise ConfigError(f"min_confidence must be in (0, 1), got {self.min_confidence}")
        if self.max_path_length < 1:
            raise ConfigError(f"max_path_length must be >= 1, got {self.max_path_length}")


@dataclass(frozen=True)
class MiningConfig:
    # None keeps every cover (no top-sigma truncation)
    sigma: Optional[int] = 10
    max_pattern_edges: int = 25

    def validate(self) -> None:
        if self.sigma is not None and self.sigma < 1:
            raise ConfigError(f"sigma must be >= 1 or '{UNBOUNDED}', got {self.sigma}")
        if self.max_pattern_edges < 1:
            raise ConfigError(f"max_pattern_edges must be >= 1, got {self.max_pattern_edges}")


@dataclass(frozen=True)
class EvaluationConfig:
    repeats: int = 3
    min_train: int = 2
    max_train: int = 3
    reference_dataset: Optional[str] = None


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    steiner: SteinerConfig = field(default_factory=SteinerConfig)
    disambiguation: DisambiguationConfig = field(default_factory=DisambiguationConfig)
    correction: TypeReductionConfig = field(default_factory=TypeReductionConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    seed: int = DEFAULT_SEED
    output_dir: Path = Path("output")
    match_subclasses: bool = False
    dump_alignment: bool = False

    def validate(self, require: tuple = ("ontology", "models", "sources")) -> "PipelineConfig":
        """Check numeric invariants and that required/referenced paths exist."""
        self.correction.validate()
        self.mining.validate()
        if self.labeling.top_k < 1:
            raise ConfigError("labeling.top_k must be >= 1")
        if not 0 < self.labeling.numeric_threshold <= 1:
            raise ConfigError("labeling.numeric_threshold must be in (0, 1]")
        if self.steiner.k < 1 or self.steiner.max_assignments < 1:
            raise ConfigError("steiner.k and steiner.max_assignments must be >= 1")
        if self.disambiguation.max_depth < 1 or self.disambiguation.min_samples_leaf < 1:
            raise ConfigError("disambiguation.max_depth and min_samples_leaf must be >= 1")
        ev = self.evaluation
        if ev.repeats < 1 or not 1 <= ev.min_train <= ev.max_train:
            raise ConfigError("evaluation needs repeats >= 1 and 1 <= min_train <= max_train")
        for name in require:
            if getattr(self.paths, name) is None:
                raise ConfigError(f"paths.{name} is required")
        for f in fields(self.paths):
            value = getattr(self.paths, f.name)
            if value is not None and f.name != "labeler_snapshot" and not Path(value).exists():
                raise ConfigError(f"paths.{f.name} does not exist: {value}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        return _stringify(data)


def _stringify(value):
    if isinstance(value, dict):
        return {k: _stringify(v) for k, v in value.items()}
    if isinstance(value, Path):
        return str(value)
    return value


def parse_sigma(value: Union[str, int, None]) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in (UNBOUNDED, "none", "inf"):
            return None
        try:
            value = int(value)
        except ValueError as e:
            raise ConfigError(f"sigma must be an integer or '{UNBOUNDED}', got '{value}'") from e
    return int(value)


def _section(cls, data: Dict[str, Any], name: str, base_dir: Optional[Path] = None, current=None):
    current = current if current is not None else cls()
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    updates = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key '{name}.{key}'")
        if cls is PathsConfig:
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            value = path
        elif cls is MiningConfig and key == "sigma":
            value = parse_sigma(value)
        updates[key] = value
    try:
        return replace(current, **updates)
    except TypeError as e:
        raise ConfigError(f"invalid [{name}] section: {e}") from e


_SECTIONS = {
    "paths": PathsConfig,
    "labeling": LabelingConfig,
    "steiner": SteinerConfig,
    "disambiguation": DisambiguationConfig,
    "correction": TypeReductionConfig,
    "mining": MiningConfig,
    "evaluation": EvaluationConfig,
}


def config_from_toml(path: Union[str, Path], base: Optional[PipelineConfig] = None) -> PipelineConfig:
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    config = base or PipelineConfig()
    base_dir = path.resolve().parent
    updates: Dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            updates[key] = _section(_SECTIONS[key], value, key, base_dir, getattr(config, key))
        elif key == "seed":
            updates["seed"] = int(value)
        elif key == "output_dir":
            out = Path(value)
            updates["output_dir"] = out if out.is_absolute() else base_dir / out
        elif key in ("match_subclasses", "dump_alignment"):
            updates[key] = bool(value)
        else:
            raise ConfigError(f"{path}: unknown key '{key}'")
    logger.info(f"⚙️ Loaded config {path}")
    return replace(config, **updates)


def config_from_env(config: PipelineConfig) -> PipelineConfig:
    """Apply SEMMAP_* environment variables (after loading a .env file if present)."""
    load_dotenv()
    try:
        if os.getenv("SEMMAP_SEED"):
            config = replace(config, seed=int(os.environ["SEMMAP_SEED"]))
        if os.getenv("SEMMAP_OUTPUT_DIR"):
            config = replace(config, output_dir=Path(os.environ["SEMMAP_OUTPUT_DIR"]))
        if os.getenv("SEMMAP_KB_SNAPSHOT"):
            config = replace(config, paths=replace(config.paths, kb_snapshot=Path(os.environ["SEMMAP_KB_SNAPSHOT"])))
        if os.getenv("SEMMAP_SIGMA"):
            config = replace(config, mining=replace(config.mining, sigma=parse_sigma(os.environ["SEMMAP_SIGMA"])))
        if os.getenv("SEMMAP_ETA"):
            config = replace(
                config, correction=replace(config.correction, eta_threshold=float(os.environ["SEMMAP_ETA"]))
            )
    except ValueError as e:
        raise ConfigError(f"invalid SEMMAP_* environment value: {e}") from e
    return config


def apply_overrides(config: PipelineConfig, overrides: Dict[str, Any]) -> PipelineConfig:
    """Apply CLI overrides; keys are dotted (`mining.sigma`) or top-level (`seed`). None values are skipped."""
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"unknown override '{key}'")
            config = replace(config, **{section: _section(_SECTIONS[section], {name: value}, section, None, getattr(config, section))})
        elif key == "output_dir":
            config = replace(config, output_dir=Path(value))
        else:
            config = replace(config, **{key: value})
    return config


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    config = PipelineConfig()
    if path is not None:
        config = config_from_toml(path, config)
    config = config_from_env(config)
    if overrides:
        config = apply_overrides(config, overrides)
    return config
