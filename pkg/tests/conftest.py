"""Shared fixtures: vocabularies, record builders, randomized layout generators."""

from __future__ import annotations

import json
import random

import pytest
from PIL import Image

from posterkit.core import (
    Canvas,
    CategoryVocabulary,
    Element,
    LayoutRecord,
    NormBox,
)

LABELS = ("text", "logo", "underlay")


@pytest.fixture
def vocab() -> CategoryVocabulary:
    return CategoryVocabulary(
        name="poster", labels=LABELS, underlay_labels=frozenset({"underlay"})
    )


def make_record(
    boxes,
    labels=None,
    canvas=(800, 600),
    record_id="r0",
    domain="commercial poster",
    texts=None,
):
    labels = labels or ["text"] * len(boxes)
    texts = texts or [None] * len(boxes)
    elements = tuple(
        Element(category=label, box=NormBox(*box), text=text)
        for box, label, text in zip(boxes, labels, texts)
    )
    return LayoutRecord(
        id=record_id, canvas=Canvas(*canvas), elements=elements, domain_tag=domain
    )


def random_box(rng: random.Random, grid: int | None = None, min_px: int = 26) -> NormBox:
    """Random normalized box; with `grid`, corners land on 1/grid multiples
    (so pixel-counting oracles on that grid are exact)."""
    if grid is not None:
        width = rng.randint(min_px, grid // 2)
        height = rng.randint(min_px, grid // 2)
        left = rng.randint(0, grid - width)
        top = rng.randint(0, grid - height)
        return NormBox(left / grid, top / grid, (left + width) / grid, (top + height) / grid)
    width = rng.uniform(0.05, 0.5)
    height = rng.uniform(0.05, 0.5)
    left = rng.uniform(0.0, 1.0 - width)
    top = rng.uniform(0.0, 1.0 - height)
    return NormBox(left, top, left + width, top + height)


def random_record(
    rng: random.Random,
    n: int,
    labels=LABELS,
    canvas=(800, 600),
    grid: int | None = None,
    record_id="rand",
) -> LayoutRecord:
    elements = tuple(
        Element(category=rng.choice(list(labels)), box=random_box(rng, grid=grid))
        for _ in range(n)
    )
    return LayoutRecord(
        id=record_id, canvas=Canvas(*canvas), elements=elements, domain_tag="commercial poster"
    )


def write_fixture_dataset(root, n_records=5, canvas=(64, 48), element_counts=None):
    """A tiny on-disk dataset: manifest JSONL + gradient backgrounds + masks.

    Backgrounds carry a horizontal luminance gradient; saliency masks mark
    the top half salient. Returns the manifest path.
    """
    backgrounds = root / "backgrounds"
    masks = root / "masks"
    backgrounds.mkdir(parents=True, exist_ok=True)
    masks.mkdir(parents=True, exist_ok=True)
    width, height = canvas
    rows = []
    rng = random.Random(7)
    for i in range(n_records):
        bg = Image.new("RGB", (width, height))
        bg.putdata(
            [(int(255 * x / (width - 1)), 60, 120) for _ in range(height) for x in range(width)]
        )
        bg_path = backgrounds / f"bg{i}.png"
        bg.save(bg_path)
        mask = Image.new("L", (width, height))
        mask.putdata([255 if y < height // 2 else 0 for y in range(height) for _ in range(width)])
        mask_path = masks / f"mask{i}.png"
        mask.save(mask_path)
        n_elems = (element_counts or [2, 3, 4])[i % len(element_counts or [2, 3, 4])]
        elements = []
        for j in range(n_elems):
            box = random_box(rng)
            elements.append(
                {
                    "label": LABELS[j % len(LABELS)],
                    "box": list(box.as_tuple()),
                }
            )
        rows.append(
            {
                "id": f"fix{i}",
                "canvas": [width, height],
                "background": str(bg_path),
                "saliency": str(mask_path),
                "split": "test",
                "domain": "commercial poster",
                "elements": elements,
            }
        )
    manifest_path = root / "manifest.jsonl"
    manifest_path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return manifest_path
