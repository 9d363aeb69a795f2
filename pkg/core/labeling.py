#!/usr/bin/env python3
"""
🏷️ Semantic labeling of source columns

Ranks candidate semantic types (class, data property) for a column:
- TF-IDF cosine against the pooled values of each trained type (scikit-learn)
- Jaccard overlap of value sets
- 1 - Kolmogorov-Smirnov statistic when both sides are numeric (scipy)

Scores are normalized over all trained types so confidences sum to at most 1.
"""

import json
import logging
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from dateutil import parser as date_parser
from scipy import stats
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import cosine_similarity

from core.errors import LabelingError
from models.source import SourceDescription, SourceTable

logger = logging.getLogger(__name__)

TOKEN_PATTERN = r"[a-z0-9]+"
DEFAULT_TOP_K = 4
NUMERIC_THRESHOLD = 0.8

_DATE_RE = re.compile(r"^\d{4}-\d{1,2}-\d{1,2}(T.*)?$|^\d{1,2}/\d{1,2}/\d{4}$|^\d{1,2} [A-Za-z]{3,9} \d{4}$")
_GROUPED_RE = re.compile(r"^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$")


@dataclass(frozen=True, order=True)
class SemanticType:
    class_name: str
    property: str

    def __str__(self) -> str:
        return f"{self.class_name}.{self.property}"

    def to_dict(self) -> Dict[str, str]:
        return {"class": self.class_name, "property": self.property}

    @classmethod
    def from_dict(cls, data: Dict[str, str]) -> "SemanticType":
        return cls(data["class"], data["property"])


@dataclass(frozen=True)
class CandidateTypeSet:
    """Ranked candidate types for one column, highest confidence first."""
    column: str
    candidates: Tuple[Tuple[SemanticType, float], ...] = ()

    def __post_init__(self):
        candidates = tuple((t, float(c)) for t, c in self.candidates)
        object.__setattr__(self, "candidates", candidates)
        scores = [c for _, c in candidates]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise LabelingError(f"candidates of '{self.column}' must be in descending confidence order")
        if any(not 0 <= c <= 1 for c in scores):
            raise LabelingError(f"confidences of '{self.column}' must lie in [0, 1]")

    @classmethod
    def of(cls, column: str, *pairs: Tuple[str, str, float]) -> "CandidateTypeSet":
        """CandidateTypeSet.of("Medium", ("E57_Material", "P3_has_note", 0.55), ...)"""
        return cls(column, tuple((SemanticType(c, p), s) for c, p, s in pairs))

    def types(self) -> List[SemanticType]:
        return [t for t, _ in self.candidates]

    def confidence(self, semantic_type: SemanticType) -> Optional[float]:
        for t, c in self.candidates:
            if t == semantic_type:
                return c
        return None

    def first(self) -> Optional[SemanticType]:
        return self.candidates[0][0] if self.candidates else None

    def rank_of(self, semantic_type: SemanticType) -> Optional[int]:
        for rank, t in enumerate(self.types(), start=1):
            if t == semantic_type:
                return rank
        return None

    def restricted_to(self, keep: Iterable[SemanticType]) -> "CandidateTypeSet":
        keep = set(keep)
        return CandidateTypeSet(self.column, tuple((t, c) for t, c in self.candidates if t in keep))

    def is_empty(self) -> bool:
        return not self.candidates

    def to_dict(self) -> Dict:
        return {
            "column": self.column,
            "candidates": [dict(t.to_dict(), confidence=round(c, 6)) for t, c in self.candidates],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CandidateTypeSet":
        return cls(
            data["column"],
            tuple((SemanticType(e["class"], e["property"]), float(e["confidence"])) for e in data["candidates"]),
        )


# ---------------------------------------------------------------------- value helpers


def parse_number(cell: str) -> Optional[float]:
    """Float value of a cell; date-like cells become decimal years."""
    text = str(cell).strip()
    if not text:
        return None
    if _DATE_RE.match(text):
        try:
            when = date_parser.parse(text, dayfirst="/" in text)
        except (ValueError, OverflowError):
            return None
        start = datetime(when.year, 1, 1)
        length = (datetime(when.year + 1, 1, 1) - start).days
        return when.year + (when.replace(tzinfo=None) - start).days / length
    if _GROUPED_RE.match(text):
        text = text.replace(",", "")
    try:
        value = float(text)
    except ValueError:
        return None
    return value if np.isfinite(value) else None


def non_empty(values: Iterable[str]) -> List[str]:
    return [v for v in values if str(v).strip()]


def is_numeric(values: Sequence[str], threshold: float = NUMERIC_THRESHOLD) -> bool:
    """At least `threshold` of the non-empty cells parse as numbers."""
    cells = non_empty(values)
    if not cells:
        return False
    parsed = sum(parse_number(v) is not None for v in cells)
    return parsed / len(cells) >= threshold


def numeric_sample(values: Sequence[str]) -> np.ndarray:
    parsed = [parse_number(v) for v in values]
    return np.array([p for p in parsed if p is not None], dtype=float)


def value_set(values: Iterable[str]) -> frozenset:
    return frozenset(str(v).strip().lower() for v in values if str(v).strip())


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    sa, sb = value_set(a), value_set(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def tfidf_cosine(a: Sequence[str], b: Sequence[str]) -> float:
    """TF-IDF cosine between two columns, each column read as one document."""
    vectorizer = TfidfVectorizer(lowercase=True, token_pattern=TOKEN_PATTERN)
    try:
        matrix = vectorizer.fit_transform([" ".join(a), " ".join(b)])
    except ValueError:
        return 0.0
    return float(cosine_similarity(matrix[0], matrix[1])[0, 0])


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic (0 identical, 1 disjoint)."""
    if len(a) == 0 or len(b) == 0:
        return 1.0
    return float(stats.ks_2samp(a, b).statistic)


def mw_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Mann-Whitney U of `a` against `b`, scaled to [0, 1] by n1 * n2."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    u = stats.mannwhitneyu(a, b, alternative="two-sided").statistic
    return float(u) / (len(a) * len(b))


# ---------------------------------------------------------------------- labeler


class Labeler:
    """Pooled per-type statistics for scoring new columns."""

    def __init__(self, training_values: Dict[SemanticType, List[str]], numeric_threshold: float = NUMERIC_THRESHOLD,
                 sources: Sequence[str] = ()):
        if not training_values:
            raise LabelingError("labeler needs at least one trained semantic type")
        self.numeric_threshold = numeric_threshold
        # names of the sources whose columns were pooled
        self.sources: Tuple[str, ...] = tuple(sorted(set(sources)))
        self.types: List[SemanticType] = sorted(training_values)
        self.training_values = {t: list(training_values[t]) for t in self.types}
        self.value_sets = {t: value_set(v) for t, v in self.training_values.items()}
        self.numeric = {
            t: numeric_sample(v) for t, v in self.training_values.items() if is_numeric(v, numeric_threshold)
        }
        self.vectorizer: Optional[TfidfVectorizer] = TfidfVectorizer(lowercase=True, token_pattern=TOKEN_PATTERN)
        documents = [" ".join(self.training_values[t]) for t in self.types]
        try:
            self.type_vectors = self.vectorizer.fit_transform(documents)
        except ValueError:
            logger.warning("⚠️ No tokens in training values, TF-IDF disabled")
            self.vectorizer = None
            self.type_vectors = None
        logger.info(f"📚 Labeler trained on {len(self.types)} semantic types ({len(self.numeric)} numeric)")

    def scores(self, values: Sequence[str]) -> Dict[SemanticType, float]:
        """Raw similarity of a column to every trained type."""
        if self.vectorizer is not None:
            column_vector = self.vectorizer.transform([" ".join(values)])
            cosines = cosine_similarity(column_vector, self.type_vectors)[0]
        else:
            cosines = np.zeros(len(self.types))
        column_set = value_set(values)
        column_numeric = numeric_sample(values) if is_numeric(values, self.numeric_threshold) else None
        result = {}
        for i, semantic_type in enumerate(self.types):
            if column_numeric is not None and semantic_type in self.numeric:
                result[semantic_type] = 1.0 - ks_statistic(column_numeric, self.numeric[semantic_type])
                continue
            known = self.value_sets[semantic_type]
            overlap = len(column_set & known) / len(column_set | known) if column_set | known else 0.0
            result[semantic_type] = max(float(cosines[i]), overlap)
        return result

    def to_dict(self) -> Dict:
        return {
            "numeric_threshold": self.numeric_threshold,
            "sources": list(self.sources),
            "types": [dict(t.to_dict(), values=self.training_values[t]) for t in self.types],
        }


def train_labeler(training: Sequence[SourceDescription], numeric_threshold: float = NUMERIC_THRESHOLD) -> Labeler:
    """Pool the values of every annotated column under its semantic type."""
    if not training:
        raise LabelingError("training set is empty")
    pooled: Dict[SemanticType, List[str]] = {}
    for description in training:
        for attribute in description.model.attributes():
            typed = description.model.semantic_type_of(attribute)
            if typed is None:
                raise LabelingError(f"column '{attribute}' of '{description.name}' has no data edge")
            pooled.setdefault(SemanticType(*typed), []).extend(description.source.column(attribute))
    return Labeler(pooled, numeric_threshold, [d.name for d in training])


def predict_types(labeler: Optional[Labeler], column: str, values: Sequence[str], k: int = DEFAULT_TOP_K) -> CandidateTypeSet:
    """Top-k candidate types for a column; ties broken by type name."""
    if labeler is None:
        raise LabelingError("labeler is not trained")
    if not non_empty(values):
        raise LabelingError(f"column '{column}' has no values")
    raw = labeler.scores(values)
    total = sum(raw.values())
    ranked = sorted(raw.items(), key=lambda item: (-item[1], item[0]))
    if any(score > 0 for _, score in ranked):
        ranked = [(t, s) for t, s in ranked if s > 0]
    top = [(t, (s / total) if total > 0 else 0.0) for t, s in ranked[:k]]
    return CandidateTypeSet(column, tuple(top))


def label_source(labeler: Labeler, source: SourceTable, attributes: Optional[Sequence[str]] = None,
                 k: int = DEFAULT_TOP_K) -> List[CandidateTypeSet]:
    attributes = list(attributes) if attributes is not None else source.attribute_names
    return [predict_types(labeler, a, source.column(a), k) for a in attributes]


def mrr(predictions: Sequence[CandidateTypeSet], gold: Sequence[SemanticType]) -> float:
    """Mean reciprocal rank of the gold types (0 for a gold type outside the top-k)."""
    if len(predictions) != len(gold):
        raise LabelingError(f"{len(predictions)} predictions for {len(gold)} gold types")
    if not predictions:
        return 0.0
    total = 0.0
    for prediction, expected in zip(predictions, gold):
        rank = prediction.rank_of(expected)
        total += 1.0 / rank if rank else 0.0
    return total / len(predictions)


def save_labeler(labeler: Labeler, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(labeler.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    logger.info(f"💾 Saved labeler snapshot to {path}")


def load_labeler(path: Union[str, Path]) -> Labeler:
    """Rebuild a labeler from its snapshot (the pooled values are retrained)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        pooled = {SemanticType(e["class"], e["property"]): list(e["values"]) for e in data["types"]}
        threshold = float(data.get("numeric_threshold", NUMERIC_THRESHOLD))
        sources = [str(name) for name in data["sources"]]
    except FileNotFoundError as e:
        raise LabelingError(f"labeler snapshot not found: {path}") from e
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise LabelingError(f"malformed labeler snapshot {path}: {e}") from e
    return Labeler(pooled, threshold, sources)
