"""Batch command-line front end.

Subcommands: augment, induce, split, evaluate, ablate, report. Every run
writes exactly one manifest recording the merged config, seeds, paths and
counts, so any output can be reproduced bit-for-bit.

Exit codes: 0 success, 2 unusable input, 3 partial failures (details in the
manifest), 4 renderer unavailable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .augment import (AnnotatedPage, AugmentationConfig, leave_one_out_configs,
                      page_seed, apply_pipeline_logged, ALL_TRANSFORMS)
from .dataset import (ScanBankManifest, emit_via, parse_predictions, parse_via,
                      PredictionValidationError, ViaParseError, UnsupportedShapeError)
from .evaluator import MatchConfig, evaluate_corpus, fold_statistics, CorpusMetrics
from .induce import (InductionAbortError, InductionReport, RendererConfig,
                     RendererError, induce_labels, inject_box_markup,
                     render, RenderedDocument)
from .raster import read_png, write_png, write_metadata_sidecar, RNG_ALGORITHM

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PARTIAL = 3
EXIT_NO_RENDERER = 4

ENV_COMPILE_CMD = "DOCFIG_COMPILE_CMD"
ENV_RASTER_CMD = "DOCFIG_RASTER_CMD"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Reproducibility record for one CLI run."""

    command: str
    config: dict
    seed: int | None
    inputs: list[str]
    outputs: list[str]
    version: str = __version__
    rng: str = RNG_ALGORITHM
    counts: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _load_json(path: Path, what: str) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise CliError(f"{what} not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed {what} {path}: {exc}")


def _augment_config(args) -> AugmentationConfig:
    doc = _load_json(Path(args.config), "config file") if args.config else {}
    try:
        cfg = AugmentationConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad augmentation config: {exc}")
    if args.seed is not None:
        cfg = AugmentationConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def cmd_augment(args) -> int:
    cfg = _augment_config(args)
    indir = Path(args.input)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    pages = sorted(indir.glob("*.png"))
    ann_path = indir / "annotations.json"
    annotations = parse_via(ann_path.read_text()) if ann_path.exists() else {}

    failures: list[str] = []
    out_annotations: dict = {}

    def process(item):
        index, path = item
        pcfg = AugmentationConfig.from_dict(
            {**cfg.to_dict(), "seed": page_seed(cfg.seed, index)})
        page = AnnotatedPage(path.name, read_png(path),
                             tuple(annotations.get(path.name, [])))
        result, log = apply_pipeline_logged(page, pcfg)
        write_png(result.image, outdir / path.name)
        write_metadata_sidecar(outdir / f"{path.stem}.meta.json", pcfg.seed, log)
        return path.name, list(result.boxes)

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        for item in pool.map(_guarded(process, failures), enumerate(pages)):
            if item is not None:
                out_annotations[item[0]] = item[1]

    (outdir / "annotations.json").write_text(emit_via(out_annotations))
    manifest = RunManifest(
        command="augment", config=cfg.to_dict(), seed=cfg.seed,
        inputs=[str(indir)], outputs=[str(outdir)],
        counts={"pages_processed": len(out_annotations), "pages_failed": len(failures)},
        failures=failures, wall_time_s=time.monotonic() - started)
    manifest.write(outdir / "manifest.json")
    return EXIT_PARTIAL if failures else EXIT_OK


def _guarded(fn, failures: list[str]):
    def wrapped(item):
        try:
            return fn(item)
        except Exception as exc:  # collected per page, surfaced via exit code 3
            failures.append(f"{item}: {exc}")
            return None
    return wrapped


def _renderer_config(args) -> RendererConfig:
    doc = _load_json(Path(args.config), "renderer config") if args.config else {}
    compile_cmd = os.environ.get(ENV_COMPILE_CMD, doc.get("compile_cmd"))
    raster_cmd = os.environ.get(ENV_RASTER_CMD, doc.get("raster_cmd"))
    base = RendererConfig()
    return RendererConfig(compile_cmd=compile_cmd or base.compile_cmd,
                          raster_cmd=raster_cmd or base.raster_cmd)


def _load_prerendered(doc_dir: Path, dpi: int) -> tuple[RenderedDocument, RenderedDocument]:
    plain_pngs = sorted((doc_dir / "plain").glob("*.png"))
    marked_pngs = sorted((doc_dir / "marked").glob("*.png"))
    if not plain_pngs or not marked_pngs:
        raise CliError(f"{doc_dir}: expected plain/*.png and marked/*.png")
    plain = RenderedDocument(doc_dir.name, tuple(read_png(p) for p in plain_pngs), dpi)
    marked = RenderedDocument(doc_dir.name, tuple(read_png(p) for p in marked_pngs), dpi)
    return plain, marked


def cmd_induce(args) -> int:
    indir = Path(args.input)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    report = InductionReport()
    annotations: dict = {}

    tex_sources = sorted(indir.glob("*.tex"))
    prerendered = sorted(d for d in indir.iterdir()
                         if d.is_dir() and (d / "plain").is_dir()) if indir.is_dir() else []
    if not tex_sources and not prerendered:
        raise CliError(f"no .tex sources or pre-rendered page pairs in {indir}")

    renderer = _renderer_config(args) if tex_sources else None

    def induce_one(plain, marked):
        labels = induce_labels(plain, marked)
        for page_index, boxes in labels.items():
            annotations[f"{plain.doc_id}:{page_index}"] = boxes

    for doc_dir in prerendered:
        try:
            plain, marked = _load_prerendered(doc_dir, args.dpi)
            induce_one(plain, marked)
            report.succeeded += 1
        except InductionAbortError as exc:
            report.skipped_pagination += 1
            report.failures.append(str(exc))
        except Exception as exc:
            report.failed += 1
            report.failures.append(f"{doc_dir.name}: {exc}")

    for tex in tex_sources:
        source = tex.read_text()
        try:
            plain = render(source, args.dpi, renderer, doc_id=tex.stem)
            marked = render(inject_box_markup(source), args.dpi, renderer,
                            doc_id=tex.stem)
            if len(plain.pages) != len(marked.pages):
                raise InductionAbortError(
                    f"pagination mismatch for {tex.stem}: "
                    f"{len(plain.pages)} vs {len(marked.pages)} pages")
            induce_one(plain, marked)
            report.succeeded += 1
        except InductionAbortError as exc:
            report.skipped_pagination += 1
            report.failures.append(str(exc))
        except RendererError as exc:
            if "not found" in str(exc):
                _fail(str(exc), EXIT_NO_RENDERER)
            report.failed += 1
            report.failures.append(f"{tex.stem}: {exc}")

    (outdir / "annotations.json").write_text(emit_via(annotations))
    manifest = RunManifest(
        command="induce", config={"dpi": args.dpi}, seed=None,
        inputs=[str(indir)], outputs=[str(outdir)],
        counts=report.as_dict(), failures=report.failures,
        wall_time_s=time.monotonic() - started)
    manifest.write(outdir / "manifest.json")
    return EXIT_PARTIAL if report.failed else EXIT_OK


def cmd_split(args) -> int:
    from .dataset import split_half, k_fold

    manifest_doc = ScanBankManifest.from_json(Path(args.input).read_text())
    pages = manifest_doc.page_ids()
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    outputs = []
    try:
        if args.kind == "half":
            validation, test = split_half(pages, args.seed)
            for name, ids in (("validation", validation), ("test", test)):
                path = outdir / f"{name}.json"
                path.write_text(json.dumps(ids, indent=2) + "\n")
                outputs.append(str(path))
        else:
            for i, (train, held) in enumerate(k_fold(pages, args.k, args.seed)):
                path = outdir / f"fold_{i}.json"
                path.write_text(json.dumps({"train": train, "heldout": held},
                                           indent=2) + "\n")
                outputs.append(str(path))
    except ValueError as exc:
        raise CliError(str(exc))
    manifest = RunManifest(
        command="split",
        config={"kind": args.kind, "k": args.k, "seed": args.seed},
        seed=args.seed, inputs=[args.input], outputs=outputs,
        counts={"pages": len(pages)}, wall_time_s=time.monotonic() - started)
    manifest.write(outdir / "manifest.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.monotonic()
    try:
        annotations = parse_via(Path(args.annotations).read_text())
        predictions = parse_predictions(Path(args.predictions).read_text(),
                                        known_pages=set(annotations))
    except (ViaParseError, UnsupportedShapeError, PredictionValidationError) as exc:
        raise CliError(str(exc))
    except FileNotFoundError as exc:
        raise CliError(str(exc))
    cfg = MatchConfig(confidence_threshold=args.confidence_threshold,
                      iou_threshold=args.iou_threshold)
    corpus, pages = evaluate_corpus(annotations, predictions, cfg)
    report = {
        "corpus": {"precision": corpus.precision, "recall": corpus.recall,
                   "f1": corpus.f1, "tp": corpus.tp, "fp": corpus.fp, "fn": corpus.fn},
        "pages": [{"page_id": p.page_id, "tp": p.tp, "fp": p.fp, "fn": p.fn,
                   "matches": [{"prediction": m.prediction_index,
                                "ground_truth": m.ground_truth_index,
                                "iou": m.iou, "center_distance": m.center_distance}
                               for m in p.matches]}
                  for p in pages],
    }
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    manifest = RunManifest(
        command="evaluate",
        config={"confidence_threshold": cfg.confidence_threshold,
                "iou_threshold": cfg.iou_threshold},
        seed=None, inputs=[args.annotations, args.predictions], outputs=[str(out)],
        counts={"pages": len(pages), "tp": corpus.tp, "fp": corpus.fp, "fn": corpus.fn},
        wall_time_s=time.monotonic() - started)
    manifest.write(out.with_suffix(".manifest.json"))
    print(f"precision {corpus.precision:.3f} recall {corpus.recall:.3f} "
          f"f1 {corpus.f1:.3f} (tp={corpus.tp} fp={corpus.fp} fn={corpus.fn})")
    return EXIT_OK


def cmd_ablate(args) -> int:
    doc = _load_json(Path(args.input), "base config")
    try:
        base = AugmentationConfig.from_dict(doc)
        configs = leave_one_out_configs(base)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc))
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, cfg in zip(ALL_TRANSFORMS, configs):
        path = outdir / f"ablate_without_{name}.json"
        path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
        outputs.append(str(path))
    manifest = RunManifest(
        command="ablate", config=base.to_dict(), seed=base.seed,
        inputs=[args.input], outputs=outputs,
        counts={"configs": len(configs)})
    manifest.write(outdir / "manifest.json")
    return EXIT_OK


def cmd_report(args) -> int:
    folds = []
    for path in args.reports:
        doc = _load_json(Path(path), "evaluation report")
        c = doc.get("corpus")
        if not c:
            raise CliError(f"{path}: not an evaluation report (no 'corpus' section)")
        folds.append(CorpusMetrics(c["precision"], c["recall"], c["f1"],
                                   c["tp"], c["fp"], c["fn"]))
    try:
        stats = fold_statistics(folds)
    except ValueError as exc:
        raise CliError(str(exc))
    lines = [
        f"folds      {len(folds)}",
        f"precision  mean {stats.mean_precision:.3f}  std {stats.std_precision:.3f}",
        f"recall     mean {stats.mean_recall:.3f}  std {stats.std_recall:.3f}",
        f"f1         mean {stats.mean_f1:.3f}  std {stats.std_f1:.3f}",
    ]
    text = "\n".join(lines)
    print(text)
    if args.output:
        Path(args.output).write_text(json.dumps({
            "folds": len(folds),
            "mean": {"precision": stats.mean_precision, "recall": stats.mean_recall,
                     "f1": stats.mean_f1},
            "std": {"precision": stats.std_precision, "recall": stats.std_recall,
                    "f1": stats.std_f1},
        }, indent=2) + "\n")
    return EXIT_OK


def _fail(message: str, code: int):
    raise CliError(message, code)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docfig",
        description="Figure-label induction, scanned-appearance augmentation, "
                    "and detection evaluation for document pages.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("augment", help="augment pages and co-transform their boxes")
    p.add_argument("input", help="directory of *.png pages plus annotations.json (VIA)")
    p.add_argument("--output", required=True)
    p.add_argument("--config", help="augmentation config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("induce", help="induce figure labels by render diffing")
    p.add_argument("input", help="directory of *.tex sources or <doc>/plain|marked PNG pairs")
    p.add_argument("--output", required=True)
    p.add_argument("--config", help="renderer config JSON (compile_cmd, raster_cmd)")
    p.add_argument("--dpi", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_induce)

    p = sub.add_parser("split", help="generate half or k-fold splits from a manifest")
    p.add_argument("input", help="manifest JSON")
    p.add_argument("--kind", choices=("half", "kfold"), default="half")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("evaluate", help="score predictions against annotations")
    p.add_argument("annotations", help="VIA annotation JSON")
    p.add_argument("predictions", help="prediction records CSV")
    p.add_argument("--confidence-threshold", type=float, default=0.5)
    p.add_argument("--iou-threshold", type=float, default=0.8)
    p.add_argument("--output", required=True, help="report JSON path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("ablate", help="emit the 9 leave-one-out ablation configs")
    p.add_argument("input", help="all-on base config JSON")
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("report", help="fold statistics over evaluation reports")
    p.add_argument("reports", nargs="+", help="per-fold evaluation report JSONs")
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"docfig: error: {exc}", file=sys.stderr)
        return exc.code
    except (ViaParseError, UnsupportedShapeError, PredictionValidationError,
            ValueError) as exc:
        print(f"docfig: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
