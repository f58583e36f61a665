"""Render-diff label induction.

A LaTeX source is compiled twice: once as-is, once with an injected preamble
that draws a visible frame around every float. Rasterizing both and
subtracting corresponding pages leaves only the frames; connected components
of the difference, inset by the frame stroke, become figure labels.

The external renderer (LaTeX compiler + PDF rasterizer) is an interface
contract: command templates supplied via configuration, never bundled. The
diff/labeling path works on pre-rendered page images and needs no renderer.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .augment import SourceParseError
from .geometry import BoundingBox
from .raster import PageImage, read_png

DEFAULT_DIFF_THRESHOLD = 20   # intensity units
DEFAULT_MIN_REGION_PX = 25    # components smaller than this are renderer jitter
DEFAULT_STROKE_WIDTH = 2.0    # px at 100 DPI, matches the injected frame rule

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)

_INJECT_MARKER = "% docfig:float-frames"
_INJECT_BLOCK = f"""{_INJECT_MARKER}
\\usepackage{{float}}
\\floatstyle{{boxed}}
\\restylefloat{{figure}}
\\restylefloat{{table}}
"""


class RendererError(RuntimeError):
    """The external renderer failed; carries its diagnostic output."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


class InductionAbortError(RuntimeError):
    """Markup injection changed pagination; the document must be skipped."""


@dataclass(frozen=True)
class RenderedDocument:
    """Pages of one rendered document at a uniform DPI."""

    doc_id: str
    pages: tuple[PageImage, ...]
    dpi: int

    def __post_init__(self):
        if len(self.pages) < 1:
            raise ValueError("a rendered document has at least one page")
        if self.dpi <= 0:
            raise ValueError("dpi must be positive")


@dataclass(frozen=True)
class DiffRegion:
    """One 8-connected component of the page difference mask."""

    envelope: BoundingBox
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count < 1:
            raise ValueError("a diff region is non-empty")


@dataclass(frozen=True)
class RendererConfig:
    """Command templates for the external renderer.

    `compile_cmd` placeholders: {texfile} {outdir}; must produce
    {outdir}/{stem}.pdf. `raster_cmd` placeholders: {pdf} {dpi} {outprefix};
    must produce {outprefix}-*.png, one per page, in page order.
    """

    compile_cmd: str = "pdflatex -interaction=nonstopmode -output-directory {outdir} {texfile}"
    raster_cmd: str = "pdftoppm -png -r {dpi} {pdf} {outprefix}"
    timeout_s: float = 300.0


def inject_box_markup(source: str) -> str:
    """Add a preamble directive drawing a frame around every figure/table float.

    Idempotent: a second application returns the input unchanged.
    """
    if _INJECT_MARKER in source:
        return source
    begin = source.find(r"\begin{document}")
    if begin < 0 or r"\documentclass" not in source[:begin]:
        raise SourceParseError("no preamble found (missing \\documentclass or \\begin{document})")
    return source[:begin] + _INJECT_BLOCK + source[begin:]


def render(source: str, dpi: int, cfg: RendererConfig, doc_id: str = "doc") -> RenderedDocument:
    """Compile a LaTeX source and rasterize every PDF page at the given DPI."""
    if dpi <= 0:
        raise ValueError("dpi must be positive")
    with tempfile.TemporaryDirectory(prefix="docfig-render-") as tmp:
        tmpdir = Path(tmp)
        texfile = tmpdir / f"{doc_id}.tex"
        texfile.write_text(source)
        _run(cfg.compile_cmd.format(texfile=str(texfile), outdir=str(tmpdir)), cfg.timeout_s)
        pdf = tmpdir / f"{doc_id}.pdf"
        if not pdf.exists():
            raise RendererError(f"renderer produced no PDF for {doc_id}")
        outprefix = tmpdir / "page"
        _run(cfg.raster_cmd.format(pdf=str(pdf), dpi=dpi, outprefix=str(outprefix)),
             cfg.timeout_s)
        pngs = sorted(tmpdir.glob("page*.png"))
        if not pngs:
            raise RendererError(f"rasterizer produced no page images for {doc_id}")
        return RenderedDocument(doc_id, tuple(read_png(p) for p in pngs), dpi)


def _run(cmd: str, timeout_s: float) -> None:
    try:
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True,
                              timeout=timeout_s)
    except FileNotFoundError as exc:
        raise RendererError(f"renderer command not found: {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        raise RendererError(f"renderer timed out after {timeout_s}s: {cmd}") from exc
    if proc.returncode != 0:
        raise RendererError(f"renderer exited with status {proc.returncode}: {cmd}",
                            diagnostics=(proc.stdout or "") + (proc.stderr or ""))


def diff_pages(plain: PageImage, marked: PageImage,
               threshold: float = DEFAULT_DIFF_THRESHOLD,
               min_region_px: int = DEFAULT_MIN_REGION_PX) -> list[DiffRegion]:
    """8-connected components of pixels whose absolute difference exceeds threshold."""
    if (plain.width, plain.height) != (marked.width, marked.height):
        raise ValueError(
            f"dimension mismatch: {plain.width}x{plain.height} vs {marked.width}x{marked.height}")
    a = plain.as_float()
    b = marked.as_float()
    if a.ndim != b.ndim:
        a = a if a.ndim == 3 else np.repeat(a[:, :, None], 3, axis=2)
        b = b if b.ndim == 3 else np.repeat(b[:, :, None], 3, axis=2)
    diff = np.abs(a - b)
    mask = (diff.max(axis=2) if diff.ndim == 3 else diff) > threshold
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    regions = []
    for sl, idx in zip(ndimage.find_objects(labels), range(1, count + 1)):
        npix = int(np.count_nonzero(labels[sl] == idx))
        if npix < min_region_px:
            continue
        rows, cols = sl
        # pixel (i, j) occupies [j, j+1) x [i, i+1)
        env = BoundingBox(float(cols.start), float(rows.start),
                          float(cols.stop), float(rows.stop))
        regions.append(DiffRegion(env, npix))
    return regions


def regions_to_labels(regions: list[DiffRegion],
                      stroke_width: float = DEFAULT_STROKE_WIDTH) -> list[BoundingBox]:
    """Inset each region envelope by the frame stroke; merge overlapping envelopes.

    Overlapping (or nested) frames indicate one float, so their envelopes
    collapse to the union envelope before the inset.
    """
    envelopes = [r.envelope for r in regions]
    merged = _merge_overlapping(envelopes)
    return [e.inset(stroke_width) for e in merged]


def _merge_overlapping(boxes: list[BoundingBox]) -> list[BoundingBox]:
    boxes = list(boxes)
    changed = True
    while changed:
        changed = False
        out: list[BoundingBox] = []
        for b in boxes:
            for i, o in enumerate(out):
                if _overlaps(b, o):
                    out[i] = o.union(b)
                    changed = True
                    break
            else:
                out.append(b)
        boxes = out
    return boxes


def _overlaps(a: BoundingBox, b: BoundingBox) -> bool:
    return min(a.x2, b.x2) > max(a.x1, b.x1) and min(a.y2, b.y2) > max(a.y1, b.y1)


@dataclass
class InductionReport:
    """Per-run bookkeeping: how many documents succeeded, were skipped, failed."""

    succeeded: int = 0
    skipped_pagination: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"succeeded": self.succeeded,
                "skipped_pagination": self.skipped_pagination,
                "failed": self.failed,
                "failures": list(self.failures)}


def induce_labels(plain: RenderedDocument, marked: RenderedDocument,
                  threshold: float = DEFAULT_DIFF_THRESHOLD,
                  min_region_px: int = DEFAULT_MIN_REGION_PX,
                  stroke_width: float = DEFAULT_STROKE_WIDTH) -> dict[int, list[BoundingBox]]:
    """Induce per-page labels from a (plain, marked) render pair.

    Raises InductionAbortError when the two renders disagree on page count.
    """
    if len(plain.pages) != len(marked.pages):
        raise InductionAbortError(
            f"pagination mismatch for {plain.doc_id}: "
            f"{len(plain.pages)} vs {len(marked.pages)} pages")
    labels: dict[int, list[BoundingBox]] = {}
    for i, (p, m) in enumerate(zip(plain.pages, marked.pages)):
        regions = diff_pages(p, m, threshold=threshold, min_region_px=min_region_px)
        page_labels = regions_to_labels(regions, stroke_width=stroke_width)
        page_labels = [b.clip(p.width, p.height) for b in page_labels]
        if page_labels:
            labels[i] = page_labels
    return labels
