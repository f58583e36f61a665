"""Page images and the pixel-level augmentation primitives.

Every stochastic operation is a pure function of (input, parameters, seed):
the RNG is the counter-based Philox generator, so identical seeds produce
bit-identical outputs across platforms. Out-of-frame regions are filled
with background white (255); resampling is bilinear everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Affine2, DegenerateWarpError, Point2, Projective2

RNG_ALGORITHM = "philox4x64"  # numpy's counter-based Philox bit generator

WHITE = 255


class ParameterError(ValueError):
    """An augmentation parameter is outside its valid range."""


@dataclass(frozen=True)
class RandomSeed:
    """64-bit seed for a stochastic transform."""

    seed: int

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def generator(self, *stream: int) -> np.random.Generator:
        """Philox generator for a (seed, stream...) tuple; streams never collide."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(stream))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class PageImage:
    """A rasterized page: uint8 pixels, shape (height, width) or (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ValueError("pixels must have shape (h, w) or (h, w, 3)")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @staticmethod
    def blank(width: int, height: int, value: int = WHITE, channels: int = 1) -> "PageImage":
        shape = (height, width) if channels == 1 else (height, width, 3)
        return PageImage(np.full(shape, value, dtype=np.uint8))

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)


def read_png(path: str | Path) -> PageImage:
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB") if img.mode in ("RGBA", "P", "CMYK") else img.convert("L")
    return PageImage(np.asarray(img, dtype=np.uint8))


def write_png(img: PageImage, path: str | Path) -> None:
    Image.fromarray(img.pixels, mode="L" if img.channels == 1 else "RGB").save(path, format="PNG")


def write_metadata_sidecar(path: str | Path, seed: int, transforms: list[dict]) -> None:
    """Record seed, RNG algorithm and per-transform parameters next to an image."""
    doc = {"seed": seed, "rng": RNG_ALGORITHM, "transforms": transforms}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _clamp_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def _bilinear_sample(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample at continuous pixel-center coordinates; outside the frame is white."""
    h, w = pixels.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    if pixels.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]

    def at(yy, xx):
        inside = (xx >= 0) & (xx <= w - 1) & (yy >= 0) & (yy <= h - 1)
        vals = pixels[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)].astype(np.float64)
        if pixels.ndim == 3:
            inside = inside[..., None]
        return np.where(inside, vals, float(WHITE))

    top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx
    bot = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def _warp_inverse(img: PageImage, inv: np.ndarray, projective: bool) -> PageImage:
    """Resample `img` through a 3x3 inverse (output -> input) map."""
    h, w = img.height, img.width
    # pixel centers: pixel (i, j) covers [j, j+1) x [i, i+1)
    xs, ys = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    if projective:
        denom = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
        if np.any(np.abs(denom) <= 1e-12):
            raise DegenerateWarpError("inverse warp maps output pixels to infinity")
        sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / denom
        sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / denom
    else:
        sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
        sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    # convert continuous coordinates back to pixel-center sampling positions
    return PageImage(_clamp_u8(_bilinear_sample(img.pixels, sx - 0.5, sy - 0.5)))


def rotate_affine(img: PageImage, degrees: float) -> tuple[PageImage, Affine2]:
    """Rotate about the image center onto a same-size white canvas.

    Returns the rotated image and the exact forward transform, so bounding
    boxes can be co-transformed.
    """
    t = Affine2.rotation_about(degrees, img.width / 2.0, img.height / 2.0)
    if degrees % 360.0 == 0.0:
        return img, t
    fwd = np.vstack([t.as_array(), [0.0, 0.0, 1.0]])
    out = _warp_inverse(img, np.linalg.inv(fwd), projective=False)
    return out, t


def additive_gaussian_noise(img: PageImage, mean: float, stddev: float,
                            seed: RandomSeed) -> PageImage:
    """Perturb every channel value by an independent normal draw, clamped to [0, 255]."""
    if stddev < 0:
        raise ParameterError(f"stddev must be >= 0, got {stddev}")
    if stddev == 0 and mean == 0:
        return img
    noise = seed.generator().normal(mean, stddev, size=img.pixels.shape)
    return PageImage(_clamp_u8(img.as_float() + noise))


def salt_and_pepper(img: PageImage, p: float, seed: RandomSeed) -> PageImage:
    """Replace each pixel by pure black or white (equiprobable) with probability p.

    Replacement is per pixel: all channels of a hit pixel get the same value.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must be in [0, 1], got {p}")
    if p == 0.0:
        return img
    rng = seed.generator()
    hit = rng.random((img.height, img.width)) < p
    value = np.where(rng.random((img.height, img.width)) < 0.5, 0, 255).astype(np.uint8)
    out = np.array(img.pixels)
    if img.channels == 3:
        out[hit] = value[hit][:, None]
    else:
        out[hit] = value[hit]
    return PageImage(out)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian kernel truncated at radius ceil(3*sigma), renormalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: PageImage, sigma: float) -> PageImage:
    """Separable Gaussian convolution with clamp-to-edge handling."""
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    px = img.as_float()
    if px.ndim == 2:
        px = px[:, :, None]
    padded = np.pad(px, ((r, r), (0, 0), (0, 0)), mode="edge")
    rows = sum(k[i] * padded[i:i + img.height] for i in range(len(k)))
    padded = np.pad(rows, ((0, 0), (r, r), (0, 0)), mode="edge")
    out = sum(k[i] * padded[:, i:i + img.width] for i in range(len(k)))
    if img.channels == 1:
        out = out[:, :, 0]
    return PageImage(_clamp_u8(out))


def linear_contrast(img: PageImage, alpha: float) -> PageImage:
    """Map each value v to 127 + alpha*(v - 127), clamped to [0, 255]."""
    if alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    if alpha == 1.0:
        return img
    return PageImage(_clamp_u8(127.0 + alpha * (img.as_float() - 127.0)))


def _is_convex(quad: list[Point2]) -> bool:
    """Convexity of a quadrilateral given in corner order (no self-intersection)."""
    signs = []
    for i in range(4):
        a, b, c = quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]
        cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)
        signs.append(cross)
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)


def jittered_corners(width: int, height: int, fraction: float,
                     seed: RandomSeed) -> list[Point2]:
    """Sample a target quadrilateral by jittering the image corners inward.

    Each corner moves by an independent uniform draw in [0, fraction] of the
    image extent, along both axes, toward the interior. Inward-only moves
    keep the quadrilateral convex for any fraction < 0.5.
    """
    if not 0.0 <= fraction < 0.5:
        raise ParameterError(f"jitter fraction must be in [0, 0.5), got {fraction}")
    rng = seed.generator()
    d = rng.uniform(0.0, fraction, size=(4, 2)) * np.array([width, height])
    return [
        Point2(d[0, 0], d[0, 1]),                       # top-left
        Point2(width - d[1, 0], d[1, 1]),               # top-right
        Point2(width - d[2, 0], height - d[2, 1]),      # bottom-right
        Point2(d[3, 0], height - d[3, 1]),              # bottom-left
    ]


def perspective_warp(img: PageImage, corners: list[Point2]) -> tuple[PageImage, Projective2]:
    """Warp the image rectangle onto a target quadrilateral.

    `corners` are the images of (0,0), (w,0), (w,h), (0,h) in that order.
    Returns the resampled page (bilinear, white fill outside) and the exact
    homography applied.
    """
    if len(corners) != 4:
        raise ParameterError("exactly 4 target corners required")
    if not _is_convex(corners):
        raise ParameterError("target quadrilateral is not convex")
    w, h = img.width, img.height
    src = [Point2(0, 0), Point2(w, 0), Point2(w, h), Point2(0, h)]
    t = Projective2.from_point_pairs(src, corners)
    if t.is_identity(tol=1e-9):
        return img, Projective2.identity()
    out = _warp_inverse(img, t.inverse().as_array(), projective=True)
    return out, t
