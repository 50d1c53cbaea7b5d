"""Rasterize layouts into poster images and build patch-transplant composites.

Rendering here exists for inspection and for preparing image-distance
inputs, not for production typography: one font, greedy line wrapping,
flat per-category styles.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from .core import Canvas, CategoryVocabulary, LayoutRecord, denormalize

RGBA = tuple[int, int, int, int]

FONT_CANDIDATES = (
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/truetype/liberation/LiberationSans-Regular.ttf",
)

# Cycled through categories that have no explicit style.
DEFAULT_PALETTE: tuple[RGBA, ...] = (
    (231, 76, 60, 160),
    (52, 152, 219, 160),
    (46, 204, 113, 160),
    (241, 196, 15, 160),
    (155, 89, 182, 160),
    (230, 126, 34, 160),
    (26, 188, 156, 160),
    (149, 165, 166, 160),
    (52, 73, 94, 160),
    (243, 156, 18, 160),
)


class MissingAssetError(Exception):
    def __init__(self, asset_ref: str):
        super().__init__(f"asset not found: {asset_ref!r}")
        self.asset_ref = asset_ref


class RenderWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Style:
    fill: RGBA = (200, 200, 200, 120)
    border: RGBA | None = (60, 60, 60, 255)
    border_width: int = 2
    text_color: RGBA = (20, 20, 20, 255)


@dataclass(frozen=True)
class RenderSpec:
    """Per-category styles plus the stacking rule (underlays draw first)."""

    styles: dict[str, Style] = field(default_factory=dict)
    fallback: Style = Style()
    underlay_labels: frozenset[str] = frozenset()
    background_color: RGBA = (255, 255, 255, 255)
    font_path: str | None = None

    def style_for(self, category: str) -> Style:
        return self.styles.get(category, self.fallback)

    @classmethod
    def for_vocabulary(cls, vocabulary: CategoryVocabulary) -> "RenderSpec":
        styles = {
            label: Style(fill=DEFAULT_PALETTE[i % len(DEFAULT_PALETTE)])
            for i, label in enumerate(vocabulary.labels)
        }
        return cls(styles=styles, underlay_labels=frozenset(vocabulary.underlay_labels))

    @classmethod
    def from_json(cls, path: str | Path) -> "RenderSpec":
        """Load a style file: {"styles": {label: {fill, border, border_width,
        text_color}}, "underlays": [...], "background": [...], "font": ...}."""
        doc = json.loads(Path(path).read_text(encoding="utf-8"))

        def rgba(value, default):
            return tuple(value) if value is not None else default

        styles = {}
        for label, raw in doc.get("styles", {}).items():
            styles[label] = Style(
                fill=rgba(raw.get("fill"), Style().fill),
                border=rgba(raw.get("border"), Style().border) if raw.get("border", True) else None,
                border_width=raw.get("border_width", Style().border_width),
                text_color=rgba(raw.get("text_color"), Style().text_color),
            )
        return cls(
            styles=styles,
            underlay_labels=frozenset(doc.get("underlays", ())),
            background_color=rgba(doc.get("background"), (255, 255, 255, 255)),
            font_path=doc.get("font"),
        )


class AssetStore:
    """Read-only image lookup under a root directory, cached per identifier."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._cache: dict[str, Image.Image] = {}

    def open_image(self, asset_ref: str) -> Image.Image:
        if asset_ref not in self._cache:
            path = self.root / asset_ref
            if not path.is_file():
                raise MissingAssetError(asset_ref)
            with Image.open(path) as img:
                self._cache[asset_ref] = img.convert("RGBA")
        return self._cache[asset_ref]


def _load_font(size: int, font_path: str | None = None) -> ImageFont.ImageFont:
    candidates = ([font_path] if font_path else []) + list(FONT_CANDIDATES)
    for candidate in candidates:
        try:
            return ImageFont.truetype(candidate, size)
        except OSError:
            continue
    return ImageFont.load_default(size=size)


def _wrap_greedy(draw: ImageDraw.ImageDraw, text: str, font, max_width: int) -> list[str]:
    lines: list[str] = []
    current = ""
    for word in text.split():
        trial = word if not current else f"{current} {word}"
        if not current or draw.textlength(trial, font=font) <= max_width:
            current = trial
        else:
            lines.append(current)
            current = word
    if current:
        lines.append(current)
    return lines


def _fit_text(
    draw: ImageDraw.ImageDraw,
    text: str,
    box_w: int,
    box_h: int,
    font_path: str | None,
) -> tuple[ImageFont.ImageFont, list[str], int]:
    """Largest font size whose greedy-wrapped lines fit the box.

    Binary search over the size, 8 iterations; returns (font, lines,
    line_height) at the best size found (minimum 1).
    """

    def layout_at(size: int):
        font = _load_font(size, font_path)
        lines = _wrap_greedy(draw, text, font, box_w)
        ascent, descent = font.getmetrics()
        line_height = ascent + descent
        fits = (
            bool(lines)
            and len(lines) * line_height <= box_h
            and all(draw.textlength(line, font=font) <= box_w for line in lines)
        )
        return fits, font, lines, line_height

    lo, hi = 1, max(1, box_h)
    best = layout_at(lo)[1:]
    for _ in range(8):
        mid = (lo + hi + 1) // 2
        fits, font, lines, line_height = layout_at(mid)
        if fits:
            best = (font, lines, line_height)
            lo = mid
        else:
            hi = mid - 1
        if lo >= hi:
            break
    return best


def _draw_order(record: LayoutRecord, spec: RenderSpec) -> list[int]:
    underlays = [i for i, e in enumerate(record.elements) if e.category in spec.underlay_labels]
    others = [i for i, e in enumerate(record.elements) if e.category not in spec.underlay_labels]
    return underlays + others


def render(
    record: LayoutRecord,
    store: AssetStore | None = None,
    spec: RenderSpec | None = None,
) -> Image.Image:
    """Draw the record over its background (or a blank canvas) as RGBA.

    Underlay categories draw first, then the remaining elements in list
    order. Asset elements are resized into their boxes; text elements get
    the largest fitting font, centered; bare elements get the category's
    translucent fill and border. Zero-pixel boxes are skipped with a warning.
    """
    spec = spec or RenderSpec()
    canvas = record.canvas
    if record.background_ref is not None:
        if store is None:
            raise MissingAssetError(record.background_ref)
        background = store.open_image(record.background_ref)
        image = background.resize((canvas.width_px, canvas.height_px), Image.BILINEAR).convert(
            "RGBA"
        )
    else:
        image = Image.new("RGBA", (canvas.width_px, canvas.height_px), spec.background_color)

    for index in _draw_order(record, spec):
        elem = record.elements[index]
        left, top, right, bottom = denormalize(elem.box, canvas)
        width, height = right - left, bottom - top
        if width <= 0 or height <= 0:
            warnings.warn(
                f"element {index} ({elem.category!r}) has zero pixel extent, skipped",
                RenderWarning,
                stacklevel=2,
            )
            continue
        style = spec.style_for(elem.category)
        layer = Image.new("RGBA", image.size, (0, 0, 0, 0))
        draw = ImageDraw.Draw(layer)
        if elem.asset_ref is not None:
            if store is None:
                raise MissingAssetError(elem.asset_ref)
            patch = store.open_image(elem.asset_ref).resize((width, height), Image.BILINEAR)
            layer.paste(patch, (left, top))
        elif elem.text is not None:
            font, lines, line_height = _fit_text(draw, elem.text, width, height, spec.font_path)
            total_h = len(lines) * line_height
            y = top + (height - total_h) // 2
            for line in lines:
                line_w = draw.textlength(line, font=font)
                x = left + (width - line_w) / 2
                draw.text((x, y), line, font=font, fill=style.text_color)
                y += line_height
        else:
            draw.rectangle((left, top, right - 1, bottom - 1), fill=style.fill)
            if style.border is not None and style.border_width > 0:
                draw.rectangle(
                    (left, top, right - 1, bottom - 1),
                    outline=style.border,
                    width=style.border_width,
                )
        image = Image.alpha_composite(image, layer)
    return image


def render_png_bytes(
    record: LayoutRecord,
    store: AssetStore | None = None,
    spec: RenderSpec | None = None,
) -> bytes:
    """PNG payload with fixed encoder settings; byte-identical for equal inputs."""
    buffer = io.BytesIO()
    render(record, store, spec).save(buffer, format="PNG", optimize=False, compress_level=6)
    return buffer.getvalue()


def patch_transplant(
    gt_poster: Image.Image,
    gt_record: LayoutRecord,
    pred_record: LayoutRecord,
) -> Image.Image:
    """Move each patch from its ground-truth box to the predicted box.

    Crops element i's region out of the poster, resizes it (bilinear) to the
    predicted box, and composites in element order over the original poster.
    Degenerate source or destination boxes are skipped with a warning.
    """
    if len(gt_record.elements) != len(pred_record.elements):
        raise ValueError(
            f"layout length mismatch: {len(gt_record.elements)} ground-truth vs "
            f"{len(pred_record.elements)} predicted elements"
        )
    canvas = Canvas(gt_poster.width, gt_poster.height)
    source = gt_poster.convert("RGBA")
    out = source.copy()
    for i, (gt_elem, pred_elem) in enumerate(zip(gt_record.elements, pred_record.elements)):
        gl, gt_, gr, gb = denormalize(gt_elem.box, canvas)
        pl, pt, pr, pb = denormalize(pred_elem.box, canvas)
        if gr - gl <= 0 or gb - gt_ <= 0 or pr - pl <= 0 or pb - pt <= 0:
            warnings.warn(
                f"element {i} has a zero-area box, patch skipped", RenderWarning, stacklevel=2
            )
            continue
        patch = source.crop((gl, gt_, gr, gb))
        if (pr - pl, pb - pt) != patch.size:
            patch = patch.resize((pr - pl, pb - pt), Image.BILINEAR)
        out.paste(patch, (pl, pt))
    return out
