"""Annotation and dataset tooling: VIA project parsing/emission, the
manifest format, prediction ingestion, and split/fold generation.

File schemas (documented bit-exactly in the README):

* VIA project JSON — rectangular ``shape_attributes`` only, with x/y the
  top-left corner and width/height in pixels.
* Manifest JSON — ``{"entries": [{"etd_url", "doc_id", "page_count"}],
  "annotations": {page_id: [[x1, y1, x2, y2], ...]}}`` where a page_id is
  ``"<doc_id>:<page_index>"``.
* Prediction records — one CSV row per box:
  ``page_id,x1,y1,x2,y2,confidence``; blank lines and ``#`` comments skipped.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundingBox

log = logging.getLogger(__name__)


class ViaParseError(ValueError):
    """The VIA annotation text is malformed; reports the byte offset."""


class UnsupportedShapeError(ValueError):
    """A VIA region uses a non-rectangular shape."""


class PredictionValidationError(ValueError):
    """A prediction record violates the schema; reports the offending row."""


class ManifestError(ValueError):
    """The manifest is internally inconsistent."""


@dataclass(frozen=True)
class ViaRegion:
    """One rectangular VIA region: top-left corner plus extent, in pixels."""

    x: float
    y: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("VIA region width and height must be positive")

    def to_box(self) -> BoundingBox:
        return BoundingBox(self.x, self.y, self.x + self.width, self.y + self.height)

    @staticmethod
    def from_box(b: BoundingBox) -> "ViaRegion":
        return ViaRegion(b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1)


@dataclass(frozen=True)
class Prediction:
    """A detector output: one box with a confidence score."""

    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


PredictionSet = dict[str, list[Prediction]]


@dataclass(frozen=True)
class ManifestEntry:
    etd_url: str
    doc_id: str
    page_count: int

    def __post_init__(self):
        if self.page_count < 0:
            raise ValueError("page_count must be non-negative")


@dataclass
class ScanBankManifest:
    """Document URLs plus per-page annotations for a ScanBank-style corpus."""

    entries: list[ManifestEntry] = field(default_factory=list)
    annotations: dict[str, list[BoundingBox]] = field(default_factory=dict)

    def validate(self) -> None:
        page_counts = {e.doc_id: e.page_count for e in self.entries}
        for page_id, boxes in self.annotations.items():
            doc_id, _, idx = page_id.rpartition(":")
            if not doc_id or not idx.isdigit():
                raise ManifestError(f"malformed page_id {page_id!r}, "
                                    "expected '<doc_id>:<page_index>'")
            if doc_id not in page_counts:
                raise ManifestError(f"page {page_id!r} references unknown document {doc_id!r}")
            if int(idx) >= page_counts[doc_id]:
                raise ManifestError(f"page {page_id!r} exceeds page_count "
                                    f"{page_counts[doc_id]} of {doc_id!r}")
            for b in boxes:
                if b.x1 < 0 or b.y1 < 0:
                    raise ManifestError(f"negative coordinates in {page_id!r}")

    def page_ids(self) -> list[str]:
        return sorted(self.annotations)

    def to_json(self) -> str:
        doc = {
            "entries": [{"etd_url": e.etd_url, "doc_id": e.doc_id,
                         "page_count": e.page_count} for e in self.entries],
            "annotations": {pid: [[b.x1, b.y1, b.x2, b.y2] for b in boxes]
                            for pid, boxes in sorted(self.annotations.items())},
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ScanBankManifest":
        doc = json.loads(text)
        m = ScanBankManifest(
            entries=[ManifestEntry(e["etd_url"], e["doc_id"], int(e["page_count"]))
                     for e in doc.get("entries", [])],
            annotations={pid: [BoundingBox(*map(float, r)) for r in rects]
                         for pid, rects in doc.get("annotations", {}).items()},
        )
        m.validate()
        return m


@dataclass(frozen=True)
class SplitSpec:
    """How to split a page list: 'half' or 'kfold' with a seed."""

    kind: str
    seed: int
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("half", "kfold"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if self.kind == "kfold" and self.k < 2:
            raise ValueError("k-fold requires k >= 2")


def parse_via(text: str) -> dict[str, list[BoundingBox]]:
    """Parse a VIA project export into page_id -> boxes.

    Accepts both the raw image-metadata map and a full project file with a
    ``_via_img_metadata`` section. Only rectangular regions are supported.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ViaParseError(f"malformed VIA JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ViaParseError("VIA project must be a JSON object")
    metadata = doc.get("_via_img_metadata", doc)
    out: dict[str, list[BoundingBox]] = {}
    for key, entry in metadata.items():
        if key.startswith("_via_"):
            continue
        if not isinstance(entry, dict) or "regions" not in entry:
            raise ViaParseError(f"entry {key!r} has no regions list")
        page_id = entry.get("filename", key)
        boxes = []
        for region in entry["regions"]:
            shape = region.get("shape_attributes", {})
            if shape.get("name") != "rect":
                raise UnsupportedShapeError(
                    f"page {page_id!r} has a {shape.get('name', 'missing')!r} region; "
                    "only 'rect' is supported")
            boxes.append(ViaRegion(float(shape["x"]), float(shape["y"]),
                                   float(shape["width"]), float(shape["height"])).to_box())
        out[page_id] = boxes
    return out


def emit_via(annotations: dict[str, list[BoundingBox]]) -> str:
    """Emit annotations as VIA image metadata; inverse of parse_via.

    Fractional coordinates survive the round trip at full float precision.
    """
    doc = {}
    for page_id in sorted(annotations):
        regions = []
        for b in annotations[page_id]:
            r = ViaRegion.from_box(b)
            regions.append({
                "shape_attributes": {"name": "rect", "x": r.x, "y": r.y,
                                     "width": r.width, "height": r.height},
                "region_attributes": {},
            })
        doc[page_id] = {"filename": page_id, "size": -1, "regions": regions}
    return json.dumps(doc, indent=2)


def _shuffled(pages: list[str], seed: int) -> list[str]:
    # sort first so the partition depends only on the page set and the seed,
    # never on input order
    ordered = sorted(set(pages))
    if len(ordered) != len(pages):
        raise ValueError("duplicate page ids in split input")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return [ordered[i] for i in rng.permutation(len(ordered))]


def split_half(pages: list[str], seed: int) -> tuple[list[str], list[str]]:
    """Shuffle deterministically, then cut into validation/test halves.

    The validation half gets ceil(n/2) pages.
    """
    if len(pages) < 2:
        raise ValueError("half split requires at least 2 pages")
    shuffled = _shuffled(pages, seed)
    cut = math.ceil(len(shuffled) / 2)
    return shuffled[:cut], shuffled[cut:]


def k_fold(pages: list[str], k: int, seed: int) -> list[tuple[list[str], list[str]]]:
    """k (train, held-out) pairs; fold sizes differ by at most one.

    Every page is held out exactly once; the first n mod k folds take the
    extra page.
    """
    if k < 2:
        raise ValueError("k-fold requires k >= 2")
    if k > len(pages):
        raise ValueError(f"k={k} exceeds page count {len(pages)}")
    shuffled = _shuffled(pages, seed)
    n = len(shuffled)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        held = shuffled[start:start + size]
        train = shuffled[:start] + shuffled[start + size:]
        folds.append((train, held))
        start += size
    return folds


def parse_predictions(text: str, known_pages: set[str] | None = None) -> PredictionSet:
    """Parse prediction records: ``page_id,x1,y1,x2,y2,confidence`` per line.

    Rows for pages not in `known_pages` are kept but logged as a warning
    (detectors may emit extra pages).
    """
    out: PredictionSet = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 6:
            raise PredictionValidationError(
                f"row {lineno}: expected 6 fields (page_id,x1,y1,x2,y2,confidence), "
                f"got {len(parts)}")
        page_id = parts[0]
        try:
            x1, y1, x2, y2, conf = map(float, parts[1:])
        except ValueError as exc:
            raise PredictionValidationError(f"row {lineno}: non-numeric field: {exc}") from exc
        if not 0.0 <= conf <= 1.0:
            raise PredictionValidationError(
                f"row {lineno}: confidence {conf} outside [0, 1]")
        try:
            box = BoundingBox(x1, y1, x2, y2)
        except ValueError as exc:
            raise PredictionValidationError(f"row {lineno}: {exc}") from exc
        if known_pages is not None and page_id not in known_pages:
            log.warning("prediction row %d references unknown page %r", lineno, page_id)
        out.setdefault(page_id, []).append(Prediction(box, conf))
    return out


def emit_predictions(preds: PredictionSet) -> str:
    lines = ["# page_id,x1,y1,x2,y2,confidence"]
    for page_id in sorted(preds):
        for p in preds[page_id]:
            b = p.box
            lines.append(f"{page_id},{b.x1!r},{b.y1!r},{b.x2!r},{b.y2!r},{p.confidence!r}")
    return "\n".join(lines) + "\n"
