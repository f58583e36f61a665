"""Augmentation pipeline: composed image transforms with bounding-box
co-transformation, LaTeX-source transforms, and leave-one-out ablation
config generation.

Image transforms run in a fixed order, geometric first so photometric
noise is never geometrically warped:

    affine rotation -> perspective -> gaussian blur -> gaussian noise
    -> salt-and-pepper -> linear contrast
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import raster
from .geometry import BoundingBox, transform_box
from .raster import PageImage, RandomSeed

IMAGE_TRANSFORMS = (
    "affine_rotation",
    "perspective",
    "gaussian_blur",
    "gaussian_noise",
    "salt_pepper",
    "linear_contrast",
)
LATEX_TRANSFORMS = ("font_size_12pt", "typewriter_font", "line_spacing_1_5")
ALL_TRANSFORMS = IMAGE_TRANSFORMS + LATEX_TRANSFORMS

MIN_BOX_AREA = 1.0  # px^2; clipped boxes below this are dropped

# RNG stream ids, one per stochastic transform, so disabling one transform
# never shifts the draws of another
_STREAM = {"affine_rotation": 0, "perspective": 1, "gaussian_noise": 2, "salt_pepper": 3}


class SourceParseError(ValueError):
    """The LaTeX source lacks a required structural marker."""


class AmbiguousSourceError(SourceParseError):
    """The LaTeX source contains more than one document-class declaration."""


@dataclass(frozen=True)
class AugmentationConfig:
    """Toggles and parameters for the nine transforms, plus the run seed."""

    affine_rotation: bool = False
    perspective: bool = False
    gaussian_blur: bool = False
    gaussian_noise: bool = False
    salt_pepper: bool = False
    linear_contrast: bool = False
    font_size_12pt: bool = False
    typewriter_font: bool = False
    line_spacing_1_5: bool = False

    rotation_range: float = 1.0         # degrees, sampled uniform on [-r, +r]
    noise_mean: float = 0.0
    noise_stddev: float = 10.0          # intensity units; paper gives no value
    sp_probability: float = 0.1
    blur_sigma: float = 0.5
    contrast_alpha: float = 1.0
    perspective_jitter_fraction: float = 0.05

    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.sp_probability <= 1.0:
            raise ValueError("sp_probability must be in [0, 1]")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if self.noise_stddev < 0:
            raise ValueError("noise_stddev must be >= 0")

    def enabled(self, name: str) -> bool:
        if name not in ALL_TRANSFORMS:
            raise KeyError(f"unknown transform {name!r}")
        return bool(getattr(self, name))

    def all_enabled(self) -> bool:
        return all(self.enabled(n) for n in ALL_TRANSFORMS)

    @staticmethod
    def all_on(**overrides) -> "AugmentationConfig":
        flags = {name: True for name in ALL_TRANSFORMS}
        flags.update(overrides)
        return AugmentationConfig(**flags)

    def to_dict(self) -> dict:
        return {
            **{name: self.enabled(name) for name in ALL_TRANSFORMS},
            "rotation_range": self.rotation_range,
            "noise_mean": self.noise_mean,
            "noise_stddev": self.noise_stddev,
            "sp_probability": self.sp_probability,
            "blur_sigma": self.blur_sigma,
            "contrast_alpha": self.contrast_alpha,
            "perspective_jitter_fraction": self.perspective_jitter_fraction,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(doc: dict) -> "AugmentationConfig":
        known = set(AugmentationConfig().to_dict())
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return AugmentationConfig(**doc)


@dataclass(frozen=True)
class AnnotatedPage:
    """A page image with its figure bounding boxes, clipped to the frame."""

    page_id: str
    image: PageImage
    boxes: tuple[BoundingBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        clipped = tuple(b.clip(self.image.width, self.image.height) for b in self.boxes)
        object.__setattr__(self, "boxes", clipped)


def page_seed(base_seed: int, page_index: int) -> int:
    """Per-page seed derived from (document seed, page index).

    Stable under parallel processing: the derived seed depends only on the
    pair, never on processing order.
    """
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(page_index,))
    return int(seq.generate_state(1, np.uint64)[0])


def apply_pipeline_logged(page: AnnotatedPage,
                          cfg: AugmentationConfig) -> tuple[AnnotatedPage, list[dict]]:
    """Apply the enabled image transforms; co-transform, clip and filter boxes.

    Returns the augmented page and a log of applied transforms with their
    sampled parameters (for the metadata sidecar).
    """
    img = page.image
    boxes = list(page.boxes)
    seed = RandomSeed(cfg.seed)
    log: list[dict] = []

    if cfg.affine_rotation:
        rng = seed.generator(_STREAM["affine_rotation"])
        degrees = float(rng.uniform(-cfg.rotation_range, cfg.rotation_range))
        img, t = raster.rotate_affine(img, degrees)
        boxes = [transform_box(t, b) for b in boxes]
        log.append({"name": "affine_rotation", "degrees": degrees})

    if cfg.perspective:
        corners = raster.jittered_corners(
            img.width, img.height, cfg.perspective_jitter_fraction,
            _stream_seed(seed, "perspective"))
        img, t = raster.perspective_warp(img, corners)
        boxes = [transform_box(t, b) for b in boxes]
        log.append({"name": "perspective",
                    "corners": [[c.x, c.y] for c in corners],
                    "jitter_fraction": cfg.perspective_jitter_fraction})

    if cfg.gaussian_blur:
        img = raster.gaussian_blur(img, cfg.blur_sigma)
        log.append({"name": "gaussian_blur", "sigma": cfg.blur_sigma})

    if cfg.gaussian_noise:
        img = raster.additive_gaussian_noise(
            img, cfg.noise_mean, cfg.noise_stddev,
            _stream_seed(seed, "gaussian_noise"))
        log.append({"name": "gaussian_noise",
                    "mean": cfg.noise_mean, "stddev": cfg.noise_stddev})

    if cfg.salt_pepper:
        img = raster.salt_and_pepper(img, cfg.sp_probability,
                                     _stream_seed(seed, "salt_pepper"))
        log.append({"name": "salt_pepper", "probability": cfg.sp_probability})

    if cfg.linear_contrast:
        img = raster.linear_contrast(img, cfg.contrast_alpha)
        log.append({"name": "linear_contrast", "alpha": cfg.contrast_alpha})

    kept = []
    for b in boxes:
        c = b.clip(img.width, img.height)
        if c.area >= MIN_BOX_AREA:
            kept.append(c)
    return AnnotatedPage(page.page_id, img, tuple(kept)), log


def apply_pipeline(page: AnnotatedPage, cfg: AugmentationConfig) -> AnnotatedPage:
    """Apply the enabled image transforms to a page; see apply_pipeline_logged."""
    return apply_pipeline_logged(page, cfg)[0]


_DOCUMENTCLASS_RE = re.compile(r"\\documentclass(\[(?P<opts>[^\]]*)\])?\{(?P<cls>[^}]*)\}")
_BEGIN_DOCUMENT_RE = re.compile(r"\\begin\{document\}")

TYPEWRITER_DIRECTIVES = (
    r"\renewcommand\ttdefault{cmvtt}",
    r"\renewcommand{\familydefault}{\ttdefault}",
)
LINE_SPACING_DIRECTIVE = r"\linespread{1.5}"


def transform_latex_source(source: str, cfg: AugmentationConfig) -> str:
    """Apply the enabled LaTeX-source transforms as pure text edits.

    Font size adds the 12pt option to the document-class declaration; the
    typewriter and line-spacing transforms insert their preamble directives
    immediately before \\begin{document}. All edits are idempotent.
    """
    decls = list(_DOCUMENTCLASS_RE.finditer(source))
    if not decls:
        raise SourceParseError("no \\documentclass declaration found")
    if len(decls) > 1:
        raise AmbiguousSourceError(
            f"{len(decls)} \\documentclass declarations found, expected exactly one")
    out = source

    if cfg.font_size_12pt:
        m = _DOCUMENTCLASS_RE.search(out)
        opts = m.group("opts")
        if opts is None:
            repl = f"\\documentclass[12pt]{{{m.group('cls')}}}"
        elif "12pt" in [o.strip() for o in opts.split(",")]:
            repl = m.group(0)
        else:
            repl = f"\\documentclass[{opts},12pt]{{{m.group('cls')}}}"
        out = out[:m.start()] + repl + out[m.end():]

    inserts = []
    if cfg.typewriter_font:
        inserts.extend(d for d in TYPEWRITER_DIRECTIVES if d not in out)
    if cfg.line_spacing_1_5 and LINE_SPACING_DIRECTIVE not in out:
        inserts.append(LINE_SPACING_DIRECTIVE)
    if inserts:
        begin = _BEGIN_DOCUMENT_RE.search(out)
        if begin is None:
            raise SourceParseError("no \\begin{document} found")
        block = "\n".join(inserts) + "\n"
        out = out[:begin.start()] + block + out[begin.start():]
    return out


def leave_one_out_configs(base: AugmentationConfig) -> list[AugmentationConfig]:
    """The nine ablation configs: the i-th disables exactly the i-th transform."""
    if not base.all_enabled():
        disabled = [n for n in ALL_TRANSFORMS if not base.enabled(n)]
        raise ValueError(f"base config must have all transforms enabled; off: {disabled}")
    return [replace(base, **{name: False}) for name in ALL_TRANSFORMS]


def _stream_seed(seed: RandomSeed, transform: str) -> RandomSeed:
    # derive an independent 64-bit seed for one transform's stream
    seq = np.random.SeedSequence(entropy=seed.seed, spawn_key=(_STREAM[transform],))
    return RandomSeed(int(seq.generate_state(1, np.uint64)[0]))
