"""posterkit: a toolkit for content-aware poster layout generation.

Layouts are canvases with ordered, categorized, normalized bounding boxes.
The package covers the full loop around a layout-generating model: encoding
layouts as JSON, building generation prompts, talking to a backend (or a
deterministic mock), repairing model output, scoring layouts with the
standard geometric / content / similarity metrics, checking user
constraints, rendering posters, and managing dataset manifests.
"""

from .codec import PromptBundle, RepairLog, build_prompt, extract, mask, parse, serialize
from .core import (
    Canvas,
    CategoryVocabulary,
    Element,
    LayoutRecord,
    NormBox,
    ValidationError,
    denormalize,
    normalize,
    quantize,
    quantize_record,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Canvas",
    "CategoryVocabulary",
    "Element",
    "LayoutRecord",
    "NormBox",
    "PromptBundle",
    "RepairLog",
    "ValidationError",
    "build_prompt",
    "denormalize",
    "extract",
    "mask",
    "normalize",
    "parse",
    "quantize",
    "quantize_record",
    "serialize",
    "validate",
]
