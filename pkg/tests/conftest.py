import json
from pathlib import Path

import numpy as np
import pytest

from docfig.geometry import BoundingBox
from docfig.raster import PageImage

FIXTURES = Path(__file__).parent / "fixtures"


def solid_rect_page(width: int, height: int, box: BoundingBox,
                    value: int = 0) -> PageImage:
    """White page with one solid rectangle exactly filling `box`."""
    px = np.full((height, width), 255, dtype=np.uint8)
    px[int(box.y1):int(box.y2), int(box.x1):int(box.x2)] = value
    return PageImage(px)


def frame_page(width: int, height: int, frames: list[tuple[BoundingBox, int]],
               base: PageImage | None = None) -> PageImage:
    """Page with rectangle outlines; each frame is (outer envelope, stroke px)."""
    px = (np.array(base.pixels) if base is not None
          else np.full((height, width), 255, dtype=np.uint8))
    for box, stroke in frames:
        x1, y1, x2, y2 = int(box.x1), int(box.y1), int(box.x2), int(box.y2)
        px[y1:y2, x1:x2] = 0
        px[y1 + stroke:y2 - stroke, x1 + stroke:x2 - stroke] = 255
    return PageImage(px)


def dark_pixel_envelope(img: PageImage, threshold: int = 128) -> BoundingBox:
    """Axis-aligned envelope of all pixels darker than `threshold`."""
    gray = img.pixels if img.channels == 1 else img.pixels.min(axis=2)
    rows, cols = np.nonzero(gray < threshold)
    assert rows.size > 0, "no dark pixels"
    return BoundingBox(float(cols.min()), float(rows.min()),
                       float(cols.max() + 1), float(rows.max() + 1))


@pytest.fixture
def via_fixture_text() -> str:
    return (FIXTURES / "via_project.json").read_text()


@pytest.fixture
def via_fixture(via_fixture_text):
    return json.loads(via_fixture_text)
