"""Layout JSON wire format, instruction prompts, and model-output extraction.

The wire contract is frozen: a top-level ``{"layout": [...]}`` object whose
items carry ``label``, ``box`` (four numbers, [left, top, right, bottom]) and
an optional ``text``, in that key order. Serialization is deterministic and
byte-stable so prompt construction and round-trip tests can compare text
directly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Literal

from .core import (
    DEFAULT_DECIMALS,
    Element,
    LayoutRecord,
    NormBox,
    repair_box,
    truncate_value,
)


class CodecWarning(UserWarning):
    """Non-fatal oddity in parsed layout JSON (unknown keys etc.)."""


class LayoutParseError(Exception):
    """Malformed JSON; carries the character offset of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class LayoutSchemaError(Exception):
    """Well-formed JSON that does not match the layout schema."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ExtractionError(Exception):
    """No parseable JSON object found in raw model output."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class ReconciliationError(Exception):
    """Strict-policy mismatch between expected and received elements."""

    def __init__(self, message: str, expected: tuple[str, ...], received: tuple[str, ...]):
        super().__init__(message)
        self.expected = expected
        self.received = received


# Repair actions recorded while extracting model output.
CLAMPED_COORDINATE = "clamped-coordinate"
SWAPPED_CORNERS = "swapped-corners"
DROPPED_EXTRA_ELEMENT = "dropped-extra-element"
LABEL_MISMATCH = "label-mismatch"
FENCED_BLOCK_EXTRACTED = "fenced-block-extracted"


@dataclass(frozen=True)
class RepairEntry:
    action: str
    index: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class RepairLog:
    entries: tuple[RepairEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.entries)

    def count(self, action: str) -> int:
        return sum(1 for e in self.entries if e.action == action)

    def to_json(self) -> str:
        return json.dumps(
            [{"action": e.action, "index": e.index, "detail": e.detail} for e in self.entries]
        )


@dataclass(frozen=True)
class PromptBundle:
    """One ready-to-send generation request plus what we expect back."""

    user_text: str
    expected_n: int
    expected_labels: tuple[str, ...]
    system_text: str | None = None
    image_ref: str | None = None

    def __post_init__(self):
        if len(self.expected_labels) != self.expected_n:
            raise ValueError(
                f"expected_labels has {len(self.expected_labels)} entries "
                f"but expected_n is {self.expected_n}"
            )


USER_TEMPLATE = (
    "Please help me to place {n} foreground elements over the background of "
    "{resolution} to craft a {domain}. Remember to avoid unbalance, overlap, "
    "misalignment, and occlusion of semantic-meaningful objects on the "
    "background image. Return the result by filling in the following JSON file "
    "while keeping the number and types of elements unchanged. The initial JSON "
    "is defined as: {masked_json}, in which each design element is represented "
    "by a bounding box described as [left, top, right, bottom], and each "
    "coordinate is a contiguous number in 0-1. The user constraints are defined "
    "as: {constraints}, which should be adopted as compulsory design "
    "requirements."
)

ASSISTANT_PREFIX = "Sure! Here is the design result: "


def _format_coord(value: float, decimals: int) -> str:
    # Truncate first: "%.Kf" alone would round 0.9996 up to 1.000.
    s = f"{truncate_value(value, decimals):.{decimals}f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def _element_json(elem: Element, decimals: int, with_box: bool) -> str:
    parts = [f'"label":{json.dumps(elem.category)}']
    if with_box:
        coords = ",".join(_format_coord(v, decimals) for v in elem.box.as_tuple())
        parts.append(f'"box":[{coords}]')
    if elem.text is not None:
        parts.append(f'"text":{json.dumps(elem.text)}')
    return "{" + ",".join(parts) + "}"


def serialize(record: LayoutRecord, decimals: int = DEFAULT_DECIMALS) -> str:
    """Emit the layout as deterministic JSON text, coordinates truncated to
    `decimals` digits, stable key order, no exponent notation."""
    body = ",".join(_element_json(e, decimals, with_box=True) for e in record.elements)
    return '{"layout":[' + body + "]}"


def mask(record: LayoutRecord) -> str:
    """Serialize with every bounding box removed; labels and text survive."""
    body = ",".join(_element_json(e, DEFAULT_DECIMALS, with_box=False) for e in record.elements)
    return '{"layout":[' + body + "]}"


def _read_elements(doc: object) -> list[Element]:
    if not isinstance(doc, dict):
        raise LayoutSchemaError(f"top level must be an object, got {type(doc).__name__}")
    if "layout" not in doc:
        raise LayoutSchemaError('missing top-level "layout" key')
    for key in doc:
        if key != "layout":
            warnings.warn(f"ignoring unknown top-level key {key!r}", CodecWarning, stacklevel=3)
    items = doc["layout"]
    if not isinstance(items, list):
        raise LayoutSchemaError('"layout" must be an array')
    elements: list[Element] = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise LayoutSchemaError(f"element {i} must be an object", index=i)
        for key in item:
            if key not in ("label", "box", "text"):
                warnings.warn(
                    f"element {i}: ignoring unknown key {key!r}", CodecWarning, stacklevel=3
                )
        label = item.get("label")
        if not isinstance(label, str):
            raise LayoutSchemaError(f"element {i} needs a string label", index=i)
        box = item.get("box")
        if box is None:
            raise LayoutSchemaError(f'element {i} has no "box"', index=i)
        if (
            not isinstance(box, list)
            or len(box) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box)
        ):
            raise LayoutSchemaError(
                f'element {i}: "box" must be an array of 4 numbers, got {box!r}', index=i
            )
        text = item.get("text")
        if text is not None and not isinstance(text, str):
            raise LayoutSchemaError(f'element {i}: "text" must be a string', index=i)
        elements.append(
            Element(category=label, box=NormBox(*(float(v) for v in box)), text=text)
        )
    return elements


def parse(text: str) -> list[Element]:
    """Parse layout JSON text into an element list (the record fragment).

    The canvas and domain are the caller's context. Unknown keys are ignored
    with a CodecWarning; structural violations raise LayoutSchemaError.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutParseError(f"malformed JSON at offset {exc.pos}: {exc.msg}", offset=exc.pos)
    return _read_elements(doc)


def build_prompt(
    record: LayoutRecord,
    constraints_text: str | None = None,
    decimals: int = DEFAULT_DECIMALS,
) -> PromptBundle:
    """Fill the instruction template from a record whose boxes are to be predicted.

    Boxes present on the record are ignored (the masked JSON drops them). An
    empty constraints slot is rendered as the literal "None".
    """
    del decimals  # coordinate formatting does not appear in the masked JSON
    labels = tuple(e.category for e in record.elements)
    user_text = USER_TEMPLATE.format(
        n=len(labels),
        resolution=f"{record.canvas.width_px}x{record.canvas.height_px}",
        domain=record.domain_tag,
        masked_json=mask(record),
        constraints=constraints_text if constraints_text else "None",
    )
    return PromptBundle(
        user_text=user_text,
        expected_n=len(labels),
        expected_labels=labels,
        image_ref=record.background_ref,
    )


def _scan_balanced_object(text: str, start: int) -> int | None:
    """Return the end index (exclusive) of the balanced {...} starting at `start`."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def find_json_object(text: str) -> tuple[str, int] | None:
    """Locate the first parseable JSON object via balanced-brace scanning.

    Returns (json_text, start_offset) or None. Handles surrounding prose and
    code fences uniformly because only brace balance matters.
    """
    pos = text.find("{")
    while pos != -1:
        end = _scan_balanced_object(text, pos)
        if end is not None:
            candidate = text[pos:end]
            try:
                json.loads(candidate)
                return candidate, pos
            except json.JSONDecodeError:
                pass
        pos = text.find("{", pos + 1)
    return None


ExtractPolicy = Literal["lenient", "strict"]


def extract(
    model_output: str,
    expected: PromptBundle,
    policy: ExtractPolicy = "lenient",
) -> tuple[list[Element], RepairLog]:
    """Pull a layout out of raw model output and reconcile it with the request.

    Coordinates are clamped/swapped into a valid box (logged per element).
    Extra elements beyond expected_n are dropped; missing elements and
    label-order mismatches are logged. Under "strict" any reconciliation
    issue raises instead.
    """
    found = find_json_object(model_output)
    if found is None:
        raise ExtractionError("no JSON object found in model output", raw_text=model_output)
    json_text, offset = found
    entries: list[RepairEntry] = []
    if "```" in model_output[:offset]:
        entries.append(RepairEntry(FENCED_BLOCK_EXTRACTED, detail="JSON inside code fence"))

    raw_elements = _read_elements(json.loads(json_text))

    repaired: list[Element] = []
    for i, elem in enumerate(raw_elements):
        fixed_box, fixes = repair_box(elem.box)
        for field_name, action, detail in fixes:
            kind = SWAPPED_CORNERS if action == "swapped" else CLAMPED_COORDINATE
            entries.append(RepairEntry(kind, index=i, detail=f"{field_name}: {detail}"))
        repaired.append(
            Element(category=elem.category, box=fixed_box, text=elem.text)
            if fixes
            else elem
        )

    received_labels = tuple(e.category for e in repaired)
    issues: list[str] = []
    kept = repaired
    if len(repaired) > expected.expected_n:
        kept = repaired[: expected.expected_n]
        for i in range(expected.expected_n, len(repaired)):
            entries.append(
                RepairEntry(DROPPED_EXTRA_ELEMENT, index=i, detail=repaired[i].category)
            )
        issues.append(f"{len(repaired) - expected.expected_n} extra element(s)")
    elif len(repaired) < expected.expected_n:
        entries.append(
            RepairEntry(
                LABEL_MISMATCH,
                detail=f"expected {expected.expected_n} elements, got {len(repaired)}",
            )
        )
        issues.append(f"{expected.expected_n - len(repaired)} missing element(s)")

    kept_labels = tuple(e.category for e in kept)
    expected_slice = expected.expected_labels[: len(kept_labels)]
    if kept_labels != expected_slice:
        if sorted(kept_labels) == sorted(expected_slice):
            detail = "label order differs from request"
        else:
            detail = f"labels differ: expected {list(expected_slice)}, got {list(kept_labels)}"
        entries.append(RepairEntry(LABEL_MISMATCH, detail=detail))
        issues.append(detail)

    if issues and policy == "strict":
        raise ReconciliationError(
            "; ".join(issues), expected=expected.expected_labels, received=received_labels
        )
    return kept, RepairLog(tuple(entries))
