#!/usr/bin/env python3
"""
📄 Source tables and source descriptions

A source is a CSV table whose header row gives the attribute names; a
source description pairs it with the semantic model mapping it to the
ontology.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import pandas as pd

from core.errors import ModelFormatError, SourceError
from models.semantic_model import SemanticModel, load_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SourceTable:
    name: str
    columns: Tuple[Tuple[str, Tuple[str, ...]], ...]

    def __post_init__(self):
        columns = tuple((str(n), tuple(str(v) for v in values)) for n, values in self.columns)
        object.__setattr__(self, "columns", columns)
        if not columns:
            raise SourceError(f"source '{self.name}' has no columns")
        names = [n for n, _ in columns]
        if len(set(names)) != len(names):
            raise SourceError(f"source '{self.name}' has duplicate attribute names")
        lengths = {len(values) for _, values in columns}
        if len(lengths) != 1:
            raise SourceError(f"source '{self.name}' has columns of unequal length")

    @classmethod
    def from_mapping(cls, name: str, columns: Dict[str, Sequence[str]]) -> "SourceTable":
        return cls(name, tuple((k, tuple(v)) for k, v in columns.items()))

    @property
    def attribute_names(self) -> List[str]:
        return [n for n, _ in self.columns]

    @property
    def row_count(self) -> int:
        return len(self.columns[0][1])

    def column(self, name: str) -> Tuple[str, ...]:
        for column_name, values in self.columns:
            if column_name == name:
                return values
        raise SourceError(f"source '{self.name}' has no attribute '{name}'")

    def row(self, i: int) -> Dict[str, str]:
        return {n: values[i] for n, values in self.columns}


@dataclass(frozen=True)
class SourceDescription:
    source: SourceTable
    model: SemanticModel

    def __post_init__(self):
        known = set(self.source.attribute_names)
        for attribute in self.model.attributes():
            if attribute not in known:
                raise ModelFormatError(
                    f"model of '{self.source.name}' maps attribute '{attribute}' absent from the source"
                )

    @property
    def name(self) -> str:
        return self.source.name


def load_source_csv(path: Union[str, Path], name: str = None) -> SourceTable:
    """Read a CSV with a header row; every cell is kept as a string."""
    path = Path(path)
    if not path.exists():
        raise SourceError("source file not found", str(path))
    try:
        header = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False)
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SourceError(f"unreadable CSV: {e}", str(path)) from e
    raw_names = [str(v) for v in header.iloc[0].tolist()]
    if len(set(raw_names)) != len(raw_names):
        raise SourceError("duplicate attribute names in header", str(path))
    columns = tuple((raw, tuple(frame[col].tolist())) for raw, col in zip(raw_names, frame.columns))
    return SourceTable(name or path.stem, columns)


def save_source_csv(source: SourceTable, path: Union[str, Path]) -> None:
    frame = pd.DataFrame({n: list(v) for n, v in source.columns}, columns=source.attribute_names)
    frame.to_csv(path, index=False)


def load_descriptions(models_dir: Union[str, Path], sources_dir: Union[str, Path]) -> List[SourceDescription]:
    """Pair every models_dir/<name>.json with sources_dir/<name>.csv, sorted by name."""
    models_dir, sources_dir = Path(models_dir), Path(sources_dir)
    if not models_dir.is_dir():
        raise SourceError("models directory not found", str(models_dir))
    descriptions = []
    for model_path in sorted(models_dir.glob("*.json")):
        csv_path = sources_dir / f"{model_path.stem}.csv"
        source = load_source_csv(csv_path, model_path.stem)
        descriptions.append(SourceDescription(source, load_model(model_path)))
    logger.info(f"📚 Loaded {len(descriptions)} source descriptions from {models_dir}")
    return descriptions
