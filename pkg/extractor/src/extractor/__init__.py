"""Embedding extraction into the ONZ1 interchange files."""

from .encoders import BackboneUnavailableError, FakeEncoder, HFClipEncoder, resolve_encoder
from .formats import (
    MAGIC,
    NORM_TOLERANCE,
    MatrixFormatError,
    read_matrix,
    require_unit_rows,
    write_labels,
    write_manifest,
    write_matrix,
)
from .job import DEFAULT_PROMPT_TEMPLATES, ExtractionJob
from .pipeline import ExtractionResult, build_class_proxies, extract
from .sources import ArraySource, Cifar10Source, DatasetUnavailableError, resolve_source

__all__ = [
    "MAGIC",
    "NORM_TOLERANCE",
    "MatrixFormatError",
    "read_matrix",
    "require_unit_rows",
    "write_labels",
    "write_manifest",
    "write_matrix",
    "DEFAULT_PROMPT_TEMPLATES",
    "ExtractionJob",
    "ExtractionResult",
    "build_class_proxies",
    "extract",
    "BackboneUnavailableError",
    "FakeEncoder",
    "HFClipEncoder",
    "resolve_encoder",
    "ArraySource",
    "Cifar10Source",
    "DatasetUnavailableError",
    "resolve_source",
]

__version__ = "0.1.0"
