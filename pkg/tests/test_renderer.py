import numpy as np
import pytest
from PIL import Image

from posterkit.core import Canvas, CategoryVocabulary, Element, LayoutRecord, NormBox
from posterkit.renderer import (
    AssetStore,
    MissingAssetError,
    RenderSpec,
    RenderWarning,
    Style,
    patch_transplant,
    render,
    render_png_bytes,
)

from conftest import make_record

RED = (255, 0, 0, 255)
OPAQUE_RED = RenderSpec(
    styles={"text": Style(fill=RED, border=None, border_width=0)},
    background_color=(255, 255, 255, 255),
)


def checkerboard(width=100, height=100, tile=10) -> Image.Image:
    arr = np.zeros((height, width, 3), dtype=np.uint8)
    for y in range(height):
        for x in range(width):
            if ((x // tile) + (y // tile)) % 2:
                arr[y, x] = (250, 200, 40)
            else:
                arr[y, x] = (30, 60, 90)
    return Image.fromarray(arr, "RGB")


class TestRender:
    def test_red_fill_pixel_count(self):
        record = make_record([(0.25, 0.25, 0.75, 0.75)], canvas=(100, 100))
        image = render(record, spec=OPAQUE_RED)
        arr = np.asarray(image)
        red_pixels = np.all(arr == RED, axis=-1)
        assert int(red_pixels.sum()) == 2500
        # nothing outside the element box was touched
        assert np.all(arr[~red_pixels] == 255)

    def test_empty_layout_equals_background(self, tmp_path):
        background = checkerboard()
        background.save(tmp_path / "bg.png")
        store = AssetStore(tmp_path)
        record = LayoutRecord(
            id="r", canvas=Canvas(100, 100), elements=(), background_ref="bg.png"
        )
        image = render(record, store=store)
        assert np.array_equal(np.asarray(image), np.asarray(background.convert("RGBA")))

    def test_blank_canvas_without_background(self):
        record = make_record([], canvas=(20, 10))
        image = render(record)
        assert image.size == (20, 10)
        assert np.all(np.asarray(image) == 255)

    def test_zorder_later_element_on_top(self):
        spec = RenderSpec(
            styles={
                "a": Style(fill=(255, 0, 0, 255), border=None),
                "b": Style(fill=(0, 0, 255, 255), border=None),
            }
        )
        record = make_record(
            [(0.0, 0.0, 0.6, 0.6), (0.4, 0.4, 1.0, 1.0)], labels=["a", "b"], canvas=(50, 50)
        )
        arr = np.asarray(render(record, spec=spec))
        # intersection pixel (25, 25) belongs to the later element
        assert tuple(arr[25, 25]) == (0, 0, 255, 255)

    def test_underlays_draw_first(self):
        spec = RenderSpec(
            styles={
                "text": Style(fill=(255, 0, 0, 255), border=None),
                "underlay": Style(fill=(0, 255, 0, 255), border=None),
            },
            underlay_labels=frozenset({"underlay"}),
        )
        # underlay listed after the text it backs; stacking must still put text on top
        record = make_record(
            [(0.2, 0.2, 0.8, 0.8), (0.0, 0.0, 1.0, 1.0)],
            labels=["text", "underlay"],
            canvas=(50, 50),
        )
        arr = np.asarray(render(record, spec=spec))
        assert tuple(arr[25, 25]) == (255, 0, 0, 255)
        assert tuple(arr[2, 2]) == (0, 255, 0, 255)

    def test_text_rendering_marks_pixels(self):
        record = make_record(
            [(0.1, 0.1, 0.9, 0.9)], canvas=(200, 100), texts=["BIG SALE"]
        )
        spec = RenderSpec(styles={"text": Style(text_color=(0, 0, 0, 255))})
        arr = np.asarray(render(record, spec=spec))
        dark = np.all(arr[..., :3] < 128, axis=-1)
        assert dark.any()
        ys, xs = np.nonzero(dark)
        assert xs.min() >= 20 and xs.max() < 180
        assert ys.min() >= 10 and ys.max() < 90

    def test_tiny_text_box_does_not_crash(self):
        record = make_record([(0.0, 0.0, 0.03, 0.03)], canvas=(100, 100), texts=["hello"])
        render(record)

    def test_zero_extent_box_skipped_with_warning(self):
        record = make_record([(0.5, 0.2, 0.5, 0.8)], canvas=(100, 100))
        with pytest.warns(RenderWarning):
            image = render(record, spec=OPAQUE_RED)
        assert np.all(np.asarray(image) == 255)

    def test_missing_asset_named(self, tmp_path):
        store = AssetStore(tmp_path)
        record = LayoutRecord(
            id="r",
            canvas=Canvas(50, 50),
            elements=(Element("logo", NormBox(0, 0, 0.5, 0.5), asset_ref="ghost.png"),),
        )
        with pytest.raises(MissingAssetError) as err:
            render(record, store=store)
        assert "ghost.png" in str(err.value)

    def test_asset_element_pasted(self, tmp_path):
        patch = Image.new("RGBA", (10, 10), (0, 255, 0, 255))
        patch.save(tmp_path / "patch.png")
        record = LayoutRecord(
            id="r",
            canvas=Canvas(100, 100),
            elements=(Element("logo", NormBox(0.0, 0.0, 0.5, 0.5), asset_ref="patch.png"),),
        )
        arr = np.asarray(render(record, store=AssetStore(tmp_path)))
        assert tuple(arr[25, 25]) == (0, 255, 0, 255)
        assert tuple(arr[75, 75]) == (255, 255, 255, 255)

    def test_determinism(self):
        record = make_record(
            [(0.1, 0.1, 0.6, 0.4), (0.3, 0.5, 0.9, 0.9)],
            labels=["text", "logo"],
            canvas=(120, 80),
            texts=["Hello", None],
        )
        vocab = CategoryVocabulary(name="v", labels=("text", "logo"))
        spec = RenderSpec.for_vocabulary(vocab)
        assert render_png_bytes(record, spec=spec) == render_png_bytes(record, spec=spec)


class TestRenderSpec:
    def test_for_vocabulary_covers_all_labels(self):
        vocab = CategoryVocabulary(
            name="v", labels=("a", "b", "c"), underlay_labels=frozenset({"b"})
        )
        spec = RenderSpec.for_vocabulary(vocab)
        assert set(spec.styles) == {"a", "b", "c"}
        assert spec.underlay_labels == {"b"}

    def test_fallback_style(self):
        spec = RenderSpec()
        assert spec.style_for("anything") == spec.fallback

    def test_from_json(self, tmp_path):
        doc = {
            "styles": {"text": {"fill": [1, 2, 3, 4], "border_width": 5}},
            "underlays": ["underlay"],
            "background": [9, 9, 9, 255],
        }
        import json

        path = tmp_path / "style.json"
        path.write_text(json.dumps(doc))
        spec = RenderSpec.from_json(path)
        assert spec.style_for("text").fill == (1, 2, 3, 4)
        assert spec.style_for("text").border_width == 5
        assert spec.underlay_labels == {"underlay"}
        assert spec.background_color == (9, 9, 9, 255)


class TestPatchTransplant:
    def test_identity_changes_nothing(self):
        poster = checkerboard()
        record = make_record(
            [(0.1, 0.1, 0.5, 0.5), (0.6, 0.6, 0.9, 0.9)], canvas=(100, 100)
        )
        out = patch_transplant(poster, record, record)
        assert np.array_equal(np.asarray(out), np.asarray(poster.convert("RGBA")))

    def test_shifted_patch_lands_at_target(self):
        poster = Image.new("RGB", (100, 100), (0, 0, 0))
        # bright patch at the source box
        arr = np.asarray(poster).copy()
        arr[10:30, 10:30] = (255, 255, 255)
        poster = Image.fromarray(arr)
        gt = make_record([(0.1, 0.1, 0.3, 0.3)], canvas=(100, 100))
        pred = make_record([(0.2, 0.1, 0.4, 0.3)], canvas=(100, 100))  # moved right 0.1
        out = np.asarray(patch_transplant(poster, gt, pred))
        diff = np.any(out[..., :3] != np.asarray(poster), axis=-1)
        ys, xs = np.nonzero(diff)
        assert xs.min() >= 10 and xs.max() < 40
        assert ys.min() >= 10 and ys.max() < 30

    def test_patches_cut_from_pristine_source(self):
        # element 0 moves onto element 1's source region; element 1 must still
        # transplant the original pixels, not element 0's pasted ones
        poster = Image.new("RGB", (100, 100), (0, 0, 0))
        arr = np.asarray(poster).copy()
        arr[0:20, 0:20] = (255, 0, 0)
        arr[0:20, 40:60] = (0, 255, 0)
        poster = Image.fromarray(arr)
        gt = make_record([(0.0, 0.0, 0.2, 0.2), (0.4, 0.0, 0.6, 0.2)], canvas=(100, 100))
        pred = make_record([(0.4, 0.0, 0.6, 0.2), (0.7, 0.0, 0.9, 0.2)], canvas=(100, 100))
        out = np.asarray(patch_transplant(poster, gt, pred))
        assert tuple(out[10, 50][:3]) == (255, 0, 0)  # red moved onto green's home
        assert tuple(out[10, 80][:3]) == (0, 255, 0)  # green from the original poster

    def test_length_mismatch(self):
        poster = checkerboard()
        gt = make_record([(0.1, 0.1, 0.5, 0.5)], canvas=(100, 100))
        pred = make_record([], canvas=(100, 100))
        with pytest.raises(ValueError):
            patch_transplant(poster, gt, pred)

    def test_zero_area_pred_box_skipped(self):
        poster = checkerboard()
        gt = make_record([(0.1, 0.1, 0.5, 0.5)], canvas=(100, 100))
        pred = make_record([(0.3, 0.3, 0.3, 0.7)], canvas=(100, 100))
        with pytest.warns(RenderWarning):
            out = patch_transplant(poster, gt, pred)
        assert np.array_equal(np.asarray(out), np.asarray(poster.convert("RGBA")))
