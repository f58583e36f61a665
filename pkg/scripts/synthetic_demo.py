#!/usr/bin/env python3
"""End-to-end demo on a synthetic corpus.

Builds a handful of white pages with black rectangles, runs the full CLI
pipeline over them (augment -> split -> evaluate -> ablate -> report) and
prints the resulting metrics. Everything lands under --workdir.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from docfig.augment import AugmentationConfig
from docfig.cli import main as docfig
from docfig.dataset import emit_predictions, emit_via, parse_via, Prediction
from docfig.geometry import BoundingBox
from docfig.raster import PageImage, write_png


def build_corpus(root: Path, n_pages: int, seed: int) -> Path:
    rng = np.random.default_rng(seed)
    indir = root / "pages"
    indir.mkdir(parents=True, exist_ok=True)
    annotations = {}
    for i in range(n_pages):
        w, h = 240, 320
        px = np.full((h, w), 255, dtype=np.uint8)
        x1, y1 = rng.integers(10, 80, 2)
        x2, y2 = x1 + rng.integers(60, 140), y1 + rng.integers(60, 180)
        px[y1:y2, x1:x2] = 0
        name = f"page-{i:04d}.png"
        write_png(PageImage(px), indir / name)
        annotations[name] = [BoundingBox(float(x1), float(y1), float(x2), float(y2))]
    (indir / "annotations.json").write_text(emit_via(annotations))
    return indir


def noisy_predictions(annotations, jitter: float, seed: int):
    rng = np.random.default_rng(seed)
    preds = {}
    for page_id, boxes in annotations.items():
        page = []
        for b in boxes:
            x1, x2 = sorted((b.x1 + rng.normal(0, jitter), b.x2 + rng.normal(0, jitter)))
            y1, y2 = sorted((b.y1 + rng.normal(0, jitter), b.y2 + rng.normal(0, jitter)))
            page.append(Prediction(BoundingBox(max(x1, 0), max(y1, 0), max(x2, 0), max(y2, 0)),
                                   float(rng.uniform(0.6, 1.0))))
        preds[page_id] = page
    return preds


def run(argv):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo_out")
    parser.add_argument("--pages", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    root = Path(args.workdir)
    indir = build_corpus(root, args.pages, args.seed)

    cfg = root / "config.json"
    cfg.write_text(json.dumps(AugmentationConfig.all_on(seed=args.seed).to_dict(),
                              indent=2))
    augmented = root / "augmented"
    assert docfig(["augment", str(indir), "--output", str(augmented),
                   "--config", str(cfg)]) == 0

    # detector stand-in: ground truth plus a little localization noise
    annotations = parse_via((augmented / "annotations.json").read_text())
    preds_path = root / "predictions.csv"
    preds_path.write_text(emit_predictions(
        noisy_predictions(annotations, jitter=1.0, seed=args.seed + 1)))

    report = root / "report.json"
    assert docfig(["evaluate", str(augmented / "annotations.json"), str(preds_path),
                   "--output", str(report)]) == 0

    ablate_dir = root / "ablation"
    assert docfig(["ablate", str(cfg), "--output", str(ablate_dir)]) == 0
    print(f"ablation configs: {len(list(ablate_dir.glob('ablate_without_*.json')))}")
    print(f"artifacts under {root}/")
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
