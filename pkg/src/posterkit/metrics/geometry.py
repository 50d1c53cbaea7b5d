"""Box-only layout quality metrics: Val, Ove, Ali, Und_l, Und_s, VB.

All functions are pure and invariant under element reordering. "Valid"
elements are those whose normalized area reaches MIN_VALID_AREA; smaller
boxes count against validity and are excluded from the pairwise metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..core import CategoryVocabulary, Element, LayoutRecord, NormBox

MIN_VALID_AREA = 1e-3
FULL_CONTAINMENT_TOL = 1e-9

ALIGNMENT_AXES = ("left", "x-center", "right", "top", "y-center", "bottom")


class UndefinedMetricError(Exception):
    """The metric has no defined value for this input (e.g. zero total area)."""


def axis_value(box: NormBox, axis: str) -> float:
    if axis == "left":
        return box.left
    if axis == "x-center":
        return (box.left + box.right) / 2.0
    if axis == "right":
        return box.right
    if axis == "top":
        return box.top
    if axis == "y-center":
        return (box.top + box.bottom) / 2.0
    if axis == "bottom":
        return box.bottom
    raise ValueError(f"unknown alignment axis {axis!r}")


def intersection_area(a: NormBox, b: NormBox) -> float:
    w = min(a.right, b.right) - max(a.left, b.left)
    h = min(a.bottom, b.bottom) - max(a.top, b.top)
    return max(0.0, w) * max(0.0, h)


def iou(a: NormBox, b: NormBox) -> float:
    inter = intersection_area(a, b)
    union = a.area() + b.area() - inter
    return inter / union if union > 0.0 else 0.0


def _valid_elements(record: LayoutRecord) -> list[Element]:
    return [e for e in record.elements if e.box.area() >= MIN_VALID_AREA]


def validity(record: LayoutRecord) -> float:
    """Fraction of elements with normalized area >= MIN_VALID_AREA; 0 if empty."""
    if not record.elements:
        return 0.0
    return len(_valid_elements(record)) / len(record.elements)


def overlap(record: LayoutRecord, vocabulary: CategoryVocabulary) -> float:
    """Mean pairwise IoU over unordered pairs of valid, non-underlay elements."""
    boxes = [
        e.box for e in _valid_elements(record) if not vocabulary.is_underlay(e.category)
    ]
    if len(boxes) < 2:
        return 0.0
    values = [
        iou(boxes[i], boxes[j])
        for i in range(len(boxes))
        for j in range(i + 1, len(boxes))
    ]
    return sum(values) / len(values)


def alignment(record: LayoutRecord) -> float:
    """Mean, over valid elements, of the nearest alignment-axis gap to any peer.

    For element i the gap is the minimum over every other valid element j and
    every axis in ALIGNMENT_AXES of |axis(i) - axis(j)|. Zero means every
    element lines up with something. Single-element layouts score 0.
    """
    boxes = [e.box for e in _valid_elements(record)]
    if len(boxes) < 2:
        return 0.0
    axes = [[axis_value(b, a) for a in ALIGNMENT_AXES] for b in boxes]
    gaps = []
    for i in range(len(boxes)):
        best = math.inf
        for j in range(len(boxes)):
            if i == j:
                continue
            for k in range(len(ALIGNMENT_AXES)):
                best = min(best, abs(axes[i][k] - axes[j][k]))
        gaps.append(best)
    return sum(gaps) / len(gaps)


def _underlay_coverage(record: LayoutRecord, vocabulary: CategoryVocabulary) -> list[float]:
    """Per-underlay best containment ratio c(u) over non-underlay elements."""
    underlays = [e.box for e in record.elements if vocabulary.is_underlay(e.category)]
    others = [
        e.box
        for e in record.elements
        if not vocabulary.is_underlay(e.category) and e.box.area() > 0.0
    ]
    coverages = []
    for u in underlays:
        c = max((intersection_area(e, u) / e.area() for e in others), default=0.0)
        coverages.append(c)
    return coverages


def underlay_loose(record: LayoutRecord, vocabulary: CategoryVocabulary) -> float:
    """Mean best containment ratio per underlay; 1.0 when no underlays exist."""
    coverages = _underlay_coverage(record, vocabulary)
    if not coverages:
        return 1.0
    return sum(coverages) / len(coverages)


def underlay_strict(record: LayoutRecord, vocabulary: CategoryVocabulary) -> float:
    """Fraction of underlays fully containing some non-underlay element."""
    coverages = _underlay_coverage(record, vocabulary)
    if not coverages:
        return 1.0
    full = sum(1 for c in coverages if c >= 1.0 - FULL_CONTAINMENT_TOL)
    return full / len(coverages)


def visual_balance(record: LayoutRecord) -> float:
    """Distance of the area-weighted element centroid from the canvas center."""
    total = sum(e.box.area() for e in record.elements)
    if total <= 0.0:
        raise UndefinedMetricError("visual balance undefined: all elements have zero area")
    cx = sum(e.box.center()[0] * e.box.area() for e in record.elements) / total
    cy = sum(e.box.center()[1] * e.box.area() for e in record.elements) / total
    return math.hypot(cx - 0.5, cy - 0.5)


@dataclass(frozen=True)
class GeometryReport:
    val: float
    ove: float
    ali: float
    und_l: float
    und_s: float
    vb: float | None
    diagnostics: dict = field(default_factory=dict)

    def scores(self) -> dict[str, float]:
        out = {
            "Val": self.val,
            "Ove": self.ove,
            "Ali": self.ali,
            "Und_l": self.und_l,
            "Und_s": self.und_s,
        }
        if self.vb is not None:
            out["VB"] = self.vb
        return out


def geometry_report(record: LayoutRecord, vocabulary: CategoryVocabulary) -> GeometryReport:
    """Compute the full geometry suite with per-element diagnostics."""
    diagnostics: dict = {
        "invalid_elements": [
            i for i, e in enumerate(record.elements) if e.box.area() < MIN_VALID_AREA
        ],
        "underlay_count": sum(
            1 for e in record.elements if vocabulary.is_underlay(e.category)
        ),
    }
    try:
        vb = visual_balance(record)
    except UndefinedMetricError:
        vb = None
        diagnostics["vb_undefined"] = "all elements have zero area"
    if diagnostics["underlay_count"] == 0:
        diagnostics["underlay_vacuous"] = True
    if len(_valid_elements(record)) < 2:
        diagnostics["pairwise_vacuous"] = True
    return GeometryReport(
        val=validity(record),
        ove=overlap(record, vocabulary),
        ali=alignment(record),
        und_l=underlay_loose(record, vocabulary),
        und_s=underlay_strict(record, vocabulary),
        vb=vb,
        diagnostics=diagnostics,
    )
