"""Dataset manifests: ingestion adapters, the JSONL interchange, stats, splits.

The canonical interchange is one JSON object per line:

    {"id": ..., "canvas": [w, h], "background": ..., "saliency": ...,
     "split": ..., "elements": [{"label": ..., "box": [l, t, r, b], "text"?}]}

with normalized corner boxes. Source datasets arrive in assorted shapes
(pixel xywh, pixel corners, numeric class ids); adapters map them into this
form row by row, skipping malformed rows with a per-row report.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core import (
    Canvas,
    CategoryVocabulary,
    Element,
    LayoutRecord,
    NormBox,
    normalize,
)


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    record: LayoutRecord
    background: str | None = None
    saliency: str | None = None
    split: str = ""


@dataclass(frozen=True)
class Manifest:
    name: str
    vocabulary: CategoryVocabulary
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def by_split(self, split: str) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.split == split)

    def missing_files(self) -> list[str]:
        """Referenced background/saliency paths that do not exist (lazy check)."""
        missing = []
        for entry in self.entries:
            for path in (entry.background, entry.saliency):
                if path and not Path(path).is_file():
                    missing.append(path)
        return missing


@dataclass(frozen=True)
class RowIssue:
    line_no: int
    message: str


@dataclass
class IngestReport:
    issues: list[RowIssue] = field(default_factory=list)
    rows_read: int = 0
    rows_kept: int = 0

    def add(self, line_no: int, message: str):
        self.issues.append(RowIssue(line_no, message))


# box_format: how the adapter's rows encode boxes.
#   norm-corner  [l, t, r, b] already normalized
#   px-corner    [l, t, r, b] in pixels
#   px-xywh      [x, y, w, h] in pixels
@dataclass(frozen=True)
class Adapter:
    name: str
    vocabulary: CategoryVocabulary
    domain_tag: str
    box_format: str = "norm-corner"
    label_map: dict = field(default_factory=dict)  # raw label/class id -> label
    strict_labels: bool = False


def generic_adapter(vocabulary: CategoryVocabulary, domain_tag: str = "poster") -> Adapter:
    return Adapter(name="generic-jsonl", vocabulary=vocabulary, domain_tag=domain_tag)


CGL_VOCABULARY = CategoryVocabulary(
    name="cgl",
    labels=("logo", "text", "underlay", "embellishment"),
    underlay_labels=frozenset({"underlay"}),
)

POSTERLAYOUT_VOCABULARY = CategoryVocabulary(
    name="posterlayout",
    labels=("text", "logo", "underlay"),
    underlay_labels=frozenset({"underlay"}),
)


def cgl_adapter(strict_labels: bool = False) -> Adapter:
    """Commercial-poster annotations: pixel xywh boxes, 4 numeric classes."""
    return Adapter(
        name="cgl-style",
        vocabulary=CGL_VOCABULARY,
        domain_tag="commercial poster",
        box_format="px-xywh",
        label_map={1: "logo", 2: "text", 3: "underlay", 4: "embellishment"},
        strict_labels=strict_labels,
    )


def posterlayout_adapter(strict_labels: bool = False) -> Adapter:
    """PosterLayout-shaped annotations: pixel corner boxes, 3 numeric classes."""
    return Adapter(
        name="posterlayout-style",
        vocabulary=POSTERLAYOUT_VOCABULARY,
        domain_tag="commercial poster",
        box_format="px-corner",
        label_map={1: "text", 2: "logo", 3: "underlay"},
        strict_labels=strict_labels,
    )


def banner_adapter(vocabulary: CategoryVocabulary, strict_labels: bool = False) -> Adapter:
    """Ad-banner annotations: pixel corner boxes, caller-supplied vocabulary
    (the source corpus never fixed its category names)."""
    return Adapter(
        name="banner-style",
        vocabulary=vocabulary,
        domain_tag="advertising banner",
        box_format="px-corner",
        strict_labels=strict_labels,
    )


ADAPTER_FACTORIES = {
    "generic-jsonl": generic_adapter,
    "cgl-style": cgl_adapter,
    "posterlayout-style": posterlayout_adapter,
    "banner-style": banner_adapter,
}


def _row_box(raw_box, box_format: str, canvas: Canvas) -> NormBox:
    if not isinstance(raw_box, (list, tuple)) or len(raw_box) != 4:
        raise IngestError(f"box must have 4 numbers, got {raw_box!r}")
    a, b, c, d = (float(v) for v in raw_box)
    if box_format == "norm-corner":
        return NormBox(a, b, c, d)
    if box_format == "px-corner":
        return normalize((a, b, c, d), canvas)
    if box_format == "px-xywh":
        return normalize((a, b, a + c, b + d), canvas)
    raise IngestError(f"unknown box format {box_format!r}")


def _row_to_entry(row: dict, adapter: Adapter, line_no: int, report: IngestReport) -> ManifestEntry | None:
    record_id = str(row.get("id", f"row-{line_no}"))
    canvas_raw = row.get("canvas")
    if canvas_raw is None and "width" in row and "height" in row:
        canvas_raw = [row["width"], row["height"]]
    if not isinstance(canvas_raw, (list, tuple)) or len(canvas_raw) != 2:
        raise IngestError(f"missing or malformed canvas: {canvas_raw!r}")
    canvas = Canvas(int(canvas_raw[0]), int(canvas_raw[1]))

    elements = []
    for raw in row.get("elements", []):
        raw_label = raw.get("label", raw.get("cls"))
        label = adapter.label_map.get(raw_label, raw_label)
        if not isinstance(label, str):
            raise IngestError(f"element label {raw_label!r} did not map to a string")
        if label not in adapter.vocabulary:
            if adapter.strict_labels:
                raise IngestError(f"unknown label {label!r} under strict mapping")
            report.add(line_no, f"{record_id}: label {label!r} outside vocabulary, kept")
        text = raw.get("text")
        elements.append(
            Element(
                category=label,
                box=_row_box(raw.get("box"), adapter.box_format, canvas),
                text=text if isinstance(text, str) else None,
                rotation_deg=float(raw.get("rotation", 0.0)),
            )
        )
    record = LayoutRecord(
        id=record_id,
        canvas=canvas,
        elements=tuple(elements),
        domain_tag=str(row.get("domain", adapter.domain_tag)),
        background_ref=row.get("background"),
        saliency_ref=row.get("saliency"),
    )
    return ManifestEntry(
        record=record,
        background=row.get("background"),
        saliency=row.get("saliency"),
        split=str(row.get("split", "")),
    )


def ingest(path: str | Path, adapter: Adapter, strict: bool = False) -> tuple[Manifest, IngestReport]:
    """Read a JSONL annotation file through an adapter.

    Malformed rows are skipped and reported; with strict=True the first bad
    row raises instead. Duplicate ids raise always (manifest invariant).
    """
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"cannot read {path}")
    report = IngestReport()
    entries: list[ManifestEntry] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            report.rows_read += 1
            try:
                row = json.loads(line)
                if not isinstance(row, dict):
                    raise IngestError("row is not a JSON object")
                entry = _row_to_entry(row, adapter, line_no, report)
            except (IngestError, ValueError, TypeError, KeyError) as exc:
                if strict:
                    raise IngestError(f"line {line_no}: {exc}") from exc
                report.add(line_no, str(exc))
                continue
            if entry.record.id in seen_ids:
                raise IngestError(f"line {line_no}: duplicate record id {entry.record.id!r}")
            seen_ids.add(entry.record.id)
            entries.append(entry)
            report.rows_kept += 1
    manifest = Manifest(name=adapter.name, vocabulary=adapter.vocabulary, entries=tuple(entries))
    return manifest, report


def export_jsonl(manifest: Manifest, path: str | Path) -> None:
    """Write the manifest in the generic interchange (full-precision floats)."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in manifest.entries:
            record = entry.record
            row: dict = {
                "id": record.id,
                "canvas": [record.canvas.width_px, record.canvas.height_px],
            }
            if entry.background:
                row["background"] = entry.background
            if entry.saliency:
                row["saliency"] = entry.saliency
            if entry.split:
                row["split"] = entry.split
            if record.domain_tag:
                row["domain"] = record.domain_tag
            elements = []
            for elem in record.elements:
                item: dict = {"label": elem.category, "box": list(elem.box.as_tuple())}
                if elem.text is not None:
                    item["text"] = elem.text
                if elem.rotation_deg:
                    item["rotation"] = elem.rotation_deg
                elements.append(item)
            row["elements"] = elements
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class CorpusStats:
    records_per_split: dict
    boxes_per_image: float
    total_boxes: int
    per_category: dict
    element_count_histogram: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "records_per_split": self.records_per_split,
                "boxes_per_image": self.boxes_per_image,
                "total_boxes": self.total_boxes,
                "per_category": self.per_category,
                "element_count_histogram": {
                    str(k): v for k, v in sorted(self.element_count_histogram.items())
                },
            }
        )

    def table(self) -> str:
        """Aligned text table, means shown to 2 decimals."""
        total = sum(self.records_per_split.values())
        rows = [
            ("Records", str(total)),
            ("Boxes/img", f"{self.boxes_per_image:.2f}"),
            ("Total Boxes", str(self.total_boxes)),
        ]
        for split, count in sorted(self.records_per_split.items()):
            rows.append((f"Split {split or '(none)'}", str(count)))
        for category, count in sorted(self.per_category.items()):
            rows.append((f"Class {category}", str(count)))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def stats(manifest: Manifest) -> CorpusStats:
    if not manifest.entries:
        raise IngestError("cannot compute stats on an empty manifest")
    per_split: dict[str, int] = {}
    per_category: dict[str, int] = {}
    histogram: dict[int, int] = {}
    total_boxes = 0
    for entry in manifest.entries:
        per_split[entry.split] = per_split.get(entry.split, 0) + 1
        n = len(entry.record.elements)
        histogram[n] = histogram.get(n, 0) + 1
        total_boxes += n
        for elem in entry.record.elements:
            per_category[elem.category] = per_category.get(elem.category, 0) + 1
    return CorpusStats(
        records_per_split=per_split,
        boxes_per_image=total_boxes / len(manifest.entries),
        total_boxes=total_boxes,
        per_category=per_category,
        element_count_histogram=histogram,
    )


def split(manifest: Manifest, ratio: float, seed: int) -> Manifest:
    """Assign train/test split tags by a seeded shuffle.

    The train side takes ceil(ratio * n) records, so odd counts lean train.
    Deterministic and idempotent for a fixed seed.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    indices = list(range(len(manifest.entries)))
    random.Random(seed).shuffle(indices)
    train_count = math.ceil(ratio * len(indices))
    train_set = set(indices[:train_count])
    entries = tuple(
        replace(entry, split="train" if i in train_set else "test")
        for i, entry in enumerate(manifest.entries)
    )
    return replace(manifest, entries=entries)
