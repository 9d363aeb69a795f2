#!/usr/bin/env python3
"""
❌ Error types for the semantic model pipeline

Library code raises these; handlers catch them at their boundary and turn
them into result dicts, and main.py turns result dicts into exit codes.
"""

from typing import Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4


class PipelineError(Exception):
    """Base class for every error the pipeline reports."""

    exit_code = EXIT_STAGE


class ConfigError(PipelineError):
    """Invalid or missing configuration."""

    exit_code = EXIT_CONFIG


class DataError(PipelineError):
    """An input file could not be read or violates its format."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class OntologyError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class KnowledgeGraphError(DataError):
    pass


class SourceError(DataError):
    pass


class StageError(PipelineError):
    """A pipeline stage failed; wraps the underlying cause."""

    exit_code = EXIT_STAGE

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


class AlignmentError(PipelineError):
    """Alignment graph cannot be built or extended."""


class SteinerError(PipelineError):
    """No Steiner tree can cover the terminals."""

    def __init__(self, message: str, attributes=()):
        self.attributes = tuple(attributes)
        super().__init__(message)


class UnlabelableColumnError(PipelineError):
    """Every candidate semantic type of an isolated column was eliminated."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"all candidate types eliminated for column '{column}'")


class LabelingError(PipelineError):
    """Semantic labeler cannot be trained or applied."""


class ClassifierError(PipelineError):
    """Relationship classifier cannot be trained or applied."""


class FixtureError(PipelineError):
    """A fixture spec is unsatisfiable or malformed."""

    exit_code = EXIT_DATA


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, PipelineError):
        return error.exit_code
    return EXIT_STAGE
