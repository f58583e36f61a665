import numpy as np
import pytest

from conftest import frame_page
from docfig.augment import SourceParseError
from docfig.geometry import BoundingBox
from docfig.induce import (DiffRegion, InductionAbortError, RenderedDocument,
                           RendererConfig, RendererError, diff_pages,
                           induce_labels, inject_box_markup, regions_to_labels,
                           render)
from docfig.raster import PageImage

SAMPLE_TEX = "\\documentclass{article}\n\\begin{document}\nhello\n\\end{document}\n"


def white(w=200, h=160):
    return PageImage(np.full((h, w), 255, dtype=np.uint8))


class TestInjectBoxMarkup:
    def test_directives_in_preamble(self):
        out = inject_box_markup(SAMPLE_TEX)
        assert "\\restylefloat{figure}" in out
        assert "\\restylefloat{table}" in out
        assert out.index("\\restylefloat{figure}") < out.index("\\begin{document}")

    def test_idempotent(self):
        once = inject_box_markup(SAMPLE_TEX)
        assert inject_box_markup(once) == once

    def test_body_untouched(self):
        out = inject_box_markup(SAMPLE_TEX)
        begin = out.index("\\begin{document}")
        assert out[begin:] == SAMPLE_TEX[SAMPLE_TEX.index("\\begin{document}"):]

    def test_missing_preamble(self):
        with pytest.raises(SourceParseError):
            inject_box_markup("no latex here")


class TestDiffPages:
    def test_identical_pages_empty(self):
        rng = np.random.default_rng(1)
        img = PageImage(rng.integers(0, 256, (80, 60), dtype=np.uint8))
        assert diff_pages(img, img) == []

    def test_single_drawn_rectangle(self):
        plain = white()
        marked = frame_page(200, 160, [(BoundingBox(10, 10, 50, 40), 2)], base=plain)
        regions = diff_pages(plain, marked)
        assert len(regions) == 1
        env = regions[0].envelope
        assert (env.x1, env.y1, env.x2, env.y2) == pytest.approx((10, 10, 50, 40), abs=1)

    def test_two_disjoint_rectangles(self):
        plain = white()
        frames = [(BoundingBox(10, 10, 60, 50), 2), (BoundingBox(100, 80, 180, 150), 2)]
        marked = frame_page(200, 160, frames, base=plain)
        regions = sorted(diff_pages(plain, marked), key=lambda r: r.envelope.x1)
        assert len(regions) == 2
        for region, (box, _) in zip(regions, frames):
            env = region.envelope
            assert (env.x1, env.y1, env.x2, env.y2) == pytest.approx(
                (box.x1, box.y1, box.x2, box.y2), abs=1)

    def test_small_regions_discarded(self):
        plain = white()
        px = np.array(plain.pixels)
        px[5, 5] = 0  # single-pixel renderer jitter
        regions = diff_pages(plain, PageImage(px), min_region_px=25)
        assert regions == []

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            diff_pages(white(100, 100), white(100, 101))

    def test_argument_symmetry(self):
        plain = white()
        marked = frame_page(200, 160, [(BoundingBox(20, 20, 90, 70), 2)], base=plain)
        assert len(diff_pages(plain, marked)) == len(diff_pages(marked, plain))


class TestRegionsToLabels:
    def test_empty(self):
        assert regions_to_labels([]) == []

    def test_inset_by_stroke(self):
        region = DiffRegion(BoundingBox(10, 10, 110, 90), pixel_count=500)
        labels = regions_to_labels([region], stroke_width=2)
        got = labels[0]
        assert (got.x1, got.y1, got.x2, got.y2) == (12, 12, 108, 88)

    def test_overlapping_envelopes_merge(self):
        a = DiffRegion(BoundingBox(0, 0, 100, 100), pixel_count=500)
        b = DiffRegion(BoundingBox(20, 20, 80, 80), pixel_count=200)
        labels = regions_to_labels([a, b], stroke_width=2)
        assert len(labels) == 1
        got = labels[0]
        assert (got.x1, got.y1, got.x2, got.y2) == (2, 2, 98, 98)

    def test_disjoint_stay_separate(self):
        a = DiffRegion(BoundingBox(0, 0, 40, 40), pixel_count=100)
        b = DiffRegion(BoundingBox(50, 50, 90, 90), pixel_count=100)
        assert len(regions_to_labels([a, b])) == 2


class TestInduceLabels:
    def _pair(self, frames, doc_id="d"):
        plain = white()
        marked = frame_page(200, 160, frames, base=plain)
        return (RenderedDocument(doc_id, (plain,), 100),
                RenderedDocument(doc_id, (marked,), 100))

    def test_roundtrip_one_frame(self):
        stroke = 2
        outer = BoundingBox(30, 20, 150, 120)
        plain, marked = self._pair([(outer, stroke)])
        labels = induce_labels(plain, marked)
        got = labels[0][0]
        truth = outer.inset(stroke)
        for g, t in zip((got.x1, got.y1, got.x2, got.y2),
                        (truth.x1, truth.y1, truth.x2, truth.y2)):
            assert abs(g - t) <= 1

    def test_pagination_mismatch(self):
        plain = RenderedDocument("d", (white(),), 100)
        marked = RenderedDocument("d", (white(), white()), 100)
        with pytest.raises(InductionAbortError):
            induce_labels(plain, marked)

    def test_no_frames_no_labels(self):
        plain = RenderedDocument("d", (white(),), 100)
        marked = RenderedDocument("d", (white(),), 100)
        assert induce_labels(plain, marked) == {}

    def test_labels_within_page_bounds(self):
        # frame hugging the page edge still yields an in-bounds label
        plain, marked = self._pair([(BoundingBox(0, 0, 200, 160), 3)])
        labels = induce_labels(plain, marked)
        box = labels[0][0]
        assert 0 <= box.x1 <= box.x2 <= 200
        assert 0 <= box.y1 <= box.y2 <= 160


class TestRender:
    def test_missing_renderer_command(self):
        cfg = RendererConfig(compile_cmd="definitely-not-a-latex-compiler {texfile} {outdir}")
        with pytest.raises(RendererError, match="not found"):
            render(SAMPLE_TEX, 100, cfg)

    def test_failing_renderer_carries_diagnostics(self):
        cfg = RendererConfig(
            compile_cmd="python3 -c import\\ sys;print('boom');sys.exit(3)")
        with pytest.raises(RendererError) as err:
            render(SAMPLE_TEX, 100, cfg)
        assert "boom" in err.value.diagnostics

    def test_invalid_dpi(self):
        with pytest.raises(ValueError):
            render(SAMPLE_TEX, 0, RendererConfig())

    def test_fake_renderer_pipeline(self, tmp_path):
        # stand-in renderer: "compile" writes an empty marker pdf, "rasterize"
        # emits two fixed-size white pages; exercises the command contract
        compile_script = tmp_path / "compile.py"
        compile_script.write_text(
            "import sys, pathlib\n"
            "tex = pathlib.Path(sys.argv[1]); out = pathlib.Path(sys.argv[2])\n"
            "(out / (tex.stem + '.pdf')).write_bytes(b'%PDF-fake')\n")
        raster_script = tmp_path / "raster.py"
        raster_script.write_text(
            "import sys\n"
            "import numpy as np\n"
            "from PIL import Image\n"
            "prefix, dpi = sys.argv[2], int(sys.argv[3])\n"
            "for i in range(2):\n"
            "    Image.fromarray(np.full((11 * dpi, 85 * dpi // 10), 255, np.uint8))."
            "save(f'{prefix}-{i + 1}.png')\n")
        cfg = RendererConfig(
            compile_cmd=f"python3 {compile_script} {{texfile}} {{outdir}}",
            raster_cmd=f"python3 {raster_script} {{pdf}} {{outprefix}} {{dpi}}")
        doc = render(SAMPLE_TEX, 10, cfg, doc_id="fixture")
        assert len(doc.pages) == 2
        assert abs(doc.pages[0].height - 11 * 10) <= 2  # US letter at 10 DPI
