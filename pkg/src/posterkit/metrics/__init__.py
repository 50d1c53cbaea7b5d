"""Layout evaluation metrics, grouped by what they need as input.

- geometry: boxes and categories only (Val, Ove, Ali, Und_l, Und_s, VB)
- content: a background image and/or saliency mask (Uti, Occ, Rea)
- similarity: a ground-truth layout or embedding sets (IoU, DocSim, Frechet)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .content import (
    BackgroundImage,
    DimensionMismatchError,
    SaliencyMask,
    gradient_magnitude,
    occlusion,
    readability,
    utility,
)
from .geometry import (
    GeometryReport,
    UndefinedMetricError,
    alignment,
    geometry_report,
    iou,
    overlap,
    underlay_loose,
    underlay_strict,
    validity,
    visual_balance,
)
from .similarity import (
    EmbeddingSet,
    GaussianSummary,
    docsim,
    frechet_distance,
    gaussian_summary,
    load_embeddings,
    matched_iou,
    save_embeddings,
)

# Canonical column order for aggregate tables.
METRIC_COLUMNS = (
    "Val",
    "Ove",
    "Ali",
    "Und_l",
    "Und_s",
    "Uti",
    "Occ",
    "Rea",
    "VB",
    "IoU",
    "DocSim",
    "Vio",
)


@dataclass
class MetricReport:
    """Named metric scores for one layout plus per-element diagnostics."""

    scores: dict[str, float] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        """Flat JSON object keyed by metric name."""
        return json.dumps(self.scores, sort_keys=False)


__all__ = [
    "METRIC_COLUMNS",
    "MetricReport",
    "BackgroundImage",
    "SaliencyMask",
    "DimensionMismatchError",
    "UndefinedMetricError",
    "GeometryReport",
    "EmbeddingSet",
    "GaussianSummary",
    "alignment",
    "docsim",
    "frechet_distance",
    "gaussian_summary",
    "geometry_report",
    "gradient_magnitude",
    "iou",
    "load_embeddings",
    "matched_iou",
    "occlusion",
    "overlap",
    "readability",
    "save_embeddings",
    "underlay_loose",
    "underlay_strict",
    "utility",
    "validity",
    "visual_balance",
]
