"""Canonical in-memory layout model: boxes, elements, records, validation.

All values are immutable after construction and all operations are pure
functions, so they are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from decimal import ROUND_DOWN, Decimal
from typing import Literal

DEFAULT_DECIMALS = 3

PixelBox = tuple[int, int, int, int]


class LayoutError(Exception):
    """Base class for structural layout errors."""


class InvalidCanvasError(LayoutError):
    pass


class ValidationError(LayoutError):
    """Raised under the reject policy; names the offending element and field."""

    def __init__(self, message: str, index: int | None = None, field_name: str | None = None):
        super().__init__(message)
        self.index = index
        self.field_name = field_name


@dataclass(frozen=True)
class NormBox:
    """Axis-aligned box in normalized [0,1] coordinates, corner order."""

    left: float
    top: float
    right: float
    bottom: float

    def width(self) -> float:
        return self.right - self.left

    def height(self) -> float:
        return self.bottom - self.top

    def area(self) -> float:
        return self.width() * self.height()

    def center(self) -> tuple[float, float]:
        return (self.left + self.right) / 2.0, (self.top + self.bottom) / 2.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.right, self.bottom)


@dataclass(frozen=True)
class Canvas:
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise InvalidCanvasError(
                f"canvas dimensions must be positive, got {self.width_px}x{self.height_px}"
            )


@dataclass(frozen=True)
class Element:
    """One design element: a category label, a box, and optional content.

    Content is either nothing, a text string, or an opaque asset identifier;
    never both text and asset at once.
    """

    category: str
    box: NormBox
    text: str | None = None
    asset_ref: str | None = None
    rotation_deg: float = 0.0

    def __post_init__(self):
        if self.text is not None and self.asset_ref is not None:
            raise LayoutError(f"element {self.category!r} has both text and asset content")
        if not -180.0 < self.rotation_deg <= 180.0:
            raise LayoutError(f"rotation_deg {self.rotation_deg} outside (-180, 180]")


@dataclass(frozen=True)
class CategoryVocabulary:
    """Ordered category labels plus the subset treated as underlays."""

    name: str
    labels: tuple[str, ...]
    underlay_labels: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise LayoutError(f"vocabulary {self.name!r} has duplicate labels")
        extra = self.underlay_labels - set(self.labels)
        if extra:
            raise LayoutError(f"underlay labels {sorted(extra)} not in vocabulary {self.name!r}")

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def is_underlay(self, label: str) -> bool:
        return label in self.underlay_labels


@dataclass(frozen=True)
class LayoutRecord:
    """A canvas plus an ordered list of elements for one design."""

    id: str
    canvas: Canvas
    elements: tuple[Element, ...]
    domain_tag: str = "poster"
    background_ref: str | None = None
    saliency_ref: str | None = None

    def __post_init__(self):
        if not isinstance(self.elements, tuple):
            object.__setattr__(self, "elements", tuple(self.elements))


@dataclass(frozen=True)
class ValidationNote:
    """One fix or finding produced by validate()."""

    index: int
    field_name: str
    action: str  # "clamped" | "swapped" | "unknown-category"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    notes: tuple[ValidationNote, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.notes)


def normalize(box_px: tuple[float, float, float, float], canvas: Canvas) -> NormBox:
    """Divide pixel coordinates by the canvas dimensions.

    Out-of-canvas inputs are not clamped here; validation is a separate step.
    """
    left, top, right, bottom = box_px
    if left > right or top > bottom:
        raise LayoutError(f"pixel box has inverted corners: {box_px}")
    w, h = float(canvas.width_px), float(canvas.height_px)
    return NormBox(left / w, top / h, right / w, bottom / h)


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def denormalize(box: NormBox, canvas: Canvas) -> PixelBox:
    """Scale a normalized box back to integer pixels (round half away from zero)."""
    w, h = canvas.width_px, canvas.height_px
    return (
        _round_half_away(box.left * w),
        _round_half_away(box.top * h),
        _round_half_away(box.right * w),
        _round_half_away(box.bottom * h),
    )


def truncate_value(x: float, decimals: int = DEFAULT_DECIMALS) -> float:
    """Truncate toward zero to a fixed number of decimal digits.

    Goes through Decimal on the shortest repr so the operation is exactly
    idempotent; a plain floor(x * 10**k) / 10**k is not, because the scaled
    float may land just below the intended integer.
    """
    if decimals < 1:
        raise ValueError(f"decimals must be >= 1, got {decimals}")
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(x)).quantize(quantum, rounding=ROUND_DOWN))


def quantize(box: NormBox, decimals: int = DEFAULT_DECIMALS) -> NormBox:
    """Truncate every coordinate of a box toward zero to `decimals` digits."""
    return NormBox(
        truncate_value(box.left, decimals),
        truncate_value(box.top, decimals),
        truncate_value(box.right, decimals),
        truncate_value(box.bottom, decimals),
    )


def quantize_record(record: LayoutRecord, decimals: int = DEFAULT_DECIMALS) -> LayoutRecord:
    elements = tuple(replace(e, box=quantize(e.box, decimals)) for e in record.elements)
    return replace(record, elements=elements)


def repair_box(box: NormBox) -> tuple[NormBox, list[tuple[str, str, str]]]:
    """Clamp coordinates into [0,1] and swap inverted corners.

    Returns the fixed box plus (field, action, detail) triples, one per fix.
    """
    fixes: list[tuple[str, str, str]] = []
    coords = {}
    for name, value in zip(("left", "top", "right", "bottom"), box.as_tuple()):
        clamped = min(1.0, max(0.0, value))
        if clamped != value:
            fixes.append((name, "clamped", f"{value} -> {clamped}"))
        coords[name] = clamped
    if coords["left"] > coords["right"]:
        coords["left"], coords["right"] = coords["right"], coords["left"]
        fixes.append(("left", "swapped", "left > right"))
    if coords["top"] > coords["bottom"]:
        coords["top"], coords["bottom"] = coords["bottom"], coords["top"]
        fixes.append(("top", "swapped", "top > bottom"))
    return NormBox(**coords), fixes


Policy = Literal["clamp", "reject"]


def validate(
    record: LayoutRecord,
    policy: Policy = "clamp",
    vocabulary: CategoryVocabulary | None = None,
) -> tuple[LayoutRecord, ValidationReport]:
    """Enforce NormBox invariants on every element.

    Under "clamp", coordinates are pulled into [0,1] and inverted corners are
    swapped, with one note per fix; unknown categories (when a vocabulary is
    given) are reported but kept. Under "reject", the first violation raises
    ValidationError naming the element index and field. Element order is
    always preserved and the operation is idempotent.
    """
    if policy not in ("clamp", "reject"):
        raise ValueError(f"unknown policy {policy!r}")
    notes: list[ValidationNote] = []
    elements: list[Element] = []
    for i, elem in enumerate(record.elements):
        fixed_box, fixes = repair_box(elem.box)
        if fixes and policy == "reject":
            field_name, action, detail = fixes[0]
            raise ValidationError(
                f"element {i} field {field_name!r}: {action} needed ({detail})",
                index=i,
                field_name=field_name,
            )
        for field_name, action, detail in fixes:
            notes.append(ValidationNote(i, field_name, action, detail))
        if vocabulary is not None and elem.category not in vocabulary:
            if policy == "reject":
                raise ValidationError(
                    f"element {i} category {elem.category!r} not in vocabulary "
                    f"{vocabulary.name!r}",
                    index=i,
                    field_name="category",
                )
            notes.append(
                ValidationNote(i, "category", "unknown-category", elem.category)
            )
        elements.append(replace(elem, box=fixed_box) if fixes else elem)
    return replace(record, elements=tuple(elements)), ValidationReport(tuple(notes))
