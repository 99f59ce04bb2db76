"""Command-line interface binding the pipeline stages together.

Commands: generate, train, predict, evaluate, report, overlay. Every command
echoes its effective merged configuration into the output directory, writes
only under --out, and is bytewise reproducible given the same seeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import DatasetManifest
from .errors import DimensionMismatchError, MdnError
from .fileio import load_image, load_manifest, load_mask, save_mask
from .synthgen import GenConfig, PRESETS, generate_dataset, load_gen_config, resave_manifest, split_dataset

OVERLAY_COLOR = (255, 0, 0)
OVERLAY_ALPHA = 0.45


def _apply_worker_cap() -> None:
    """Honor MDN_NUM_WORKERS as an upper bound on torch CPU threads."""
    cap = os.environ.get("MDN_NUM_WORKERS")
    if not cap:
        return
    import torch

    torch.set_num_threads(max(1, min(torch.get_num_threads(), int(cap))))


def _echo_config(out_dir: Path, name: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / name, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate(args) -> int:
    if args.config:
        config = load_gen_config(args.config)
    else:
        config = PRESETS[args.preset]()
    overrides = {}
    if args.n_images is not None:
        overrides["n_images"] = args.n_images
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides:
        config = GenConfig.from_dict({**config.to_dict(), **overrides})

    out_dir = Path(args.out)
    manifest = generate_dataset(config, out_dir, provenance=args.provenance)
    manifest = split_dataset(manifest, args.train_fraction, seed=config.master_seed)
    manifest_path = resave_manifest(manifest, out_dir)
    _echo_config(out_dir, "gen_config.json", config.to_dict())

    counts: dict[str, int] = {}
    for entry in manifest.entries:
        key = f"{entry.split}/{entry.provenance}"
        counts[key] = counts.get(key, 0) + 1
    print(f"wrote {len(manifest)} image/mask pairs under {out_dir}")
    for key in sorted(counts):
        print(f"  {key}: {counts[key]}")
    print(f"manifest: {manifest_path}")
    return 0


def _load_train_configs(args):
    from .segnet import SegModelConfig, TrainConfig

    model_dict: dict = {}
    train_dict: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        model_dict = dict(raw.get("model", {}))
        train_dict = dict(raw.get("train", {}))
    if args.depth is not None:
        model_dict["depth"] = args.depth
    if args.base_channels is not None:
        model_dict["base_channels"] = args.base_channels
    if args.patch_size is not None:
        model_dict["input_size"] = args.patch_size
    if args.attention:
        model_dict["use_attention"] = True
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"),
                      ("lr", "learning_rate"), ("momentum", "momentum"),
                      ("seed", "seed"), ("loss", "loss"), ("threshold", "threshold")):
        value = getattr(args, flag)
        if value is not None:
            train_dict[key] = value
    return SegModelConfig.from_dict(model_dict), TrainConfig.from_dict(train_dict)


def cmd_train(args) -> int:
    _apply_worker_cap()
    from .segnet import build_model, save_checkpoint, train

    model_config, train_config = _load_train_configs(args)
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(out_dir, "train_config.json",
                 {"model": model_config.to_dict(), "train": train_config.to_dict()})

    model = build_model(model_config, seed=train_config.seed)
    from .segnet.model import parameter_count

    print(f"model: depth={model_config.depth} base={model_config.base_channels} "
          f"params={parameter_count(model)}")
    model, history = train(model, manifest, train_config)
    for row in history:
        val = "n/a" if row["val_iou"] is None else f"{row['val_iou']:.4f}"
        print(f"epoch {row['epoch']}/{train_config.epochs}  "
              f"train_loss={row['train_loss']:.6f}  val_iou={val}")

    ckpt_path = out_dir / "checkpoint.mdn"
    save_checkpoint(model, ckpt_path, train_config=train_config,
                    epoch=train_config.epochs, history=history)
    history_path = out_dir / "history.jsonl"
    with open(history_path, "w", encoding="utf-8") as fh:
        for row in history:
            fh.write(json.dumps(row) + "\n")
    print(f"checkpoint: {ckpt_path}")
    print(f"history: {history_path}")
    return 0


def _collect_images(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir()
                      if p.suffix.lower() == ".png" and not p.stem.endswith("_mask"))
    return [path]


def cmd_predict(args) -> int:
    _apply_worker_cap()
    from .segnet import load_checkpoint, predict_mask

    model, _ = load_checkpoint(args.checkpoint)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mode = "resize" if args.resize_256 else "tile"
    _echo_config(out_dir, "predict_config.json", {
        "checkpoint": str(args.checkpoint),
        "threshold": args.threshold,
        "mode": mode,
        "patch_size": args.patch_size,
    })
    failures = 0
    for image_path in _collect_images(Path(args.input)):
        try:
            image = load_image(image_path)
            mask = predict_mask(model, image, threshold=args.threshold, mode=mode,
                                patch_size=args.patch_size)
            save_mask(mask, out_dir / f"{image_path.stem}_mask.png")
        except MdnError as exc:
            failures += 1
            print(f"error: {image_path}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_evaluate(args) -> int:
    _apply_worker_cap()
    from .evaluation import evaluate, evaluation_report_dict, metrics_table_text, save_metrics_chart
    from .segnet import load_checkpoint

    model, _ = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    mode = "resize" if args.resize_256 else "tile"
    result = evaluate(model, manifest, split=args.split, threshold=args.threshold,
                      mode=mode, patch_size=args.patch_size)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(out_dir, "evaluate_config.json", {
        "checkpoint": str(args.checkpoint),
        "manifest": str(args.manifest),
        "split": args.split,
        "threshold": args.threshold,
        "mode": mode,
        "patch_size": args.patch_size,
    })
    report = evaluation_report_dict(result)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")

    lines = [metrics_table_text(result.micro, title=f"Micro metrics over split '{args.split}'")]
    lines.append("Per-image metrics")
    for row in report["per_image"]:
        lines.append(f"  {row['image']}: iou={row['iou']:.4f} f1={row['f1']:.4f} "
                     f"precision={row['precision']:.4f} recall={row['recall']:.4f} "
                     f"accuracy={row['accuracy']:.4f}")
    with open(out_dir / "report.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    save_metrics_chart(result.micro, out_dir / "metrics.png")

    print(metrics_table_text(result.micro, title=f"Micro metrics over split '{args.split}' "
                                                 f"({result.n_images} images)"))
    return 0


def _mask_for_stem(mask_dir: Path, stem: str) -> Path | None:
    for candidate in (mask_dir / f"{stem}_mask.png", mask_dir / f"{stem}.png"):
        if candidate.is_file():
            return candidate
    return None


def cmd_report(args) -> int:
    from .evaluation import connected_components, size_report

    manifest = load_manifest(args.manifest, check_files=False)
    bins = [float(v) for v in args.bins.split(",")]
    mask_dir = Path(args.masks)
    entries = manifest.entries if args.split == "all" else manifest.for_split(args.split)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(out_dir, "report_config.json", {
        "masks": str(mask_dir),
        "manifest": str(args.manifest),
        "split": args.split,
        "bins": bins,
    })

    scale = manifest.scale_um_per_px
    per_image = []
    all_detections = []
    failures = 0
    for entry in entries:
        stem = Path(entry.image_path).stem
        mask_path = _mask_for_stem(mask_dir, stem)
        if mask_path is None:
            failures += 1
            print(f"error: no mask for {stem} under {mask_dir}", file=sys.stderr)
            continue
        detections = connected_components(load_mask(mask_path), connectivity=8,
                                          scale_um_per_px=scale)
        all_detections.extend(detections)
        per_image.append({
            "image": os.path.basename(entry.image_path),
            "mask": str(mask_path),
            "n_particles": len(detections),
            "detections": [{
                "id": d.id,
                "pixel_area": d.pixel_area,
                "centroid": [d.centroid[0], d.centroid[1]],
                "bbox": list(d.bbox),
                "feret_px": d.feret_px,
                "feret_um": d.feret_um,
            } for d in detections],
        })

    histogram = size_report(all_detections, scale, bins)
    payload = {
        "scale_um_per_px": scale,
        "bins_um": list(histogram.bin_edges_um),
        "histogram": {
            "labels": [histogram.bin_label(i) for i in range(len(histogram.counts))],
            "counts": list(histogram.counts),
            "total": histogram.total,
        },
        "per_image": per_image,
    }
    with open(out_dir / "particles.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")

    lines = [f"Particle report ({histogram.total} detections over {len(per_image)} images)"]
    for i, count in enumerate(histogram.counts):
        lines.append(f"  {histogram.bin_label(i):>16}: {count}")
    lines.append("Per-image counts")
    for row in per_image:
        lines.append(f"  {row['image']}: {row['n_particles']}")
    text = "\n".join(lines) + "\n"
    with open(out_dir / "particles.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return 1 if failures else 0


def cmd_overlay(args) -> int:
    from PIL import Image

    image = load_image(args.image)
    mask = load_mask(args.mask)
    if (image.height, image.width) != (mask.height, mask.width):
        raise DimensionMismatchError(
            f"image is {image.width}x{image.height}, mask is {mask.width}x{mask.height}"
        )
    pixels = image.pixels.astype(np.float64)
    tint = np.array(OVERLAY_COLOR, dtype=np.float64)
    sel = mask.values.astype(bool)
    pixels[sel] = (1.0 - OVERLAY_ALPHA) * pixels[sel] + OVERLAY_ALPHA * tint
    out = np.clip(np.round(pixels), 0, 255).astype(np.uint8)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(out, "RGB").save(str(out_path), format="PNG")
    print(f"overlay: {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdn",
        description="Microplastic fluorescence segmentation pipeline",
    )
    parser.add_argument("--version", action="version", version=f"mdn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic spiked dataset")
    p.add_argument("--config", help="GenConfig JSON file")
    p.add_argument("--preset", choices=sorted(PRESETS), default="easy")
    p.add_argument("--n-images", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--provenance", choices=("spiked", "real"), default="spiked")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the segmentation model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="JSON file with 'model' and/or 'train' sections")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=None, help="model input/patch size")
    p.add_argument("--attention", action="store_true")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--loss", choices=("bce", "dice", "bce_plus_dice"), default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict masks for an image or directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--resize-256", action="store_true",
                   help="resize whole images to the model input instead of tiling")
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a checkpoint against a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--resize-256", action="store_true")
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="particle statistics from masks")
    p.add_argument("--masks", required=True, help="directory of mask or prediction files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    p.add_argument("--bins", default="50,200,1000", help="comma-separated um thresholds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("overlay", help="tint mask pixels over an image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MdnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
