"""On-disk formats: 8-bit PNG rasters and the line-delimited manifest.

Images are RGB PNG with the physical scale stored in a text chunk; masks are
single-channel PNG with values exactly {0, 255} (white = microplastic). The
manifest is JSON-lines: a header record carrying master_seed and
scale_um_per_px, then one record per entry. Entry paths are stored relative
to the manifest file and resolved to absolute paths on load.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .core import BinaryMask, DatasetManifest, FluorescenceImage, ManifestEntry, ParticleSpec
from .errors import IoFailureError, ValueOutOfRangeError

SCALE_KEY = "scale_um_per_px"


def save_image(image: FluorescenceImage, path) -> None:
    """Write a raw image as RGB PNG, embedding the physical scale."""
    if image.normalized:
        raise ValueOutOfRangeError("only raw (8-bit) images are written to disk; denormalize first")
    info = PngInfo()
    info.add_text(SCALE_KEY, repr(image.scale_um_per_px))
    try:
        Image.fromarray(image.pixels, "RGB").save(str(path), format="PNG", pnginfo=info)
    except OSError as exc:
        raise IoFailureError(f"cannot write image {path}: {exc}") from exc


def load_image(path, scale_um_per_px: float | None = None) -> FluorescenceImage:
    """Read an RGB PNG back into a raw FluorescenceImage.

    The scale comes from the PNG text chunk when present; an explicit
    ``scale_um_per_px`` argument overrides it.
    """
    try:
        with Image.open(str(path)) as im:
            scale = scale_um_per_px
            if scale is None:
                text = getattr(im, "text", {}) or {}
                scale = float(text[SCALE_KEY]) if SCALE_KEY in text else None
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise IoFailureError(f"cannot read image {path}: {exc}") from exc
    if scale is None:
        return FluorescenceImage(arr, normalized=False)
    return FluorescenceImage(arr, normalized=False, scale_um_per_px=scale)


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask as single-channel PNG mapping 1 -> 255."""
    try:
        Image.fromarray(mask.values * np.uint8(255), "L").save(str(path), format="PNG")
    except OSError as exc:
        raise IoFailureError(f"cannot write mask {path}: {exc}") from exc


def load_mask(path) -> BinaryMask:
    """Read a {0, 255} single-channel PNG back into a BinaryMask."""
    try:
        with Image.open(str(path)) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise IoFailureError(f"cannot read mask {path}: {exc}") from exc
    uniq = np.unique(arr)
    if not np.all(np.isin(uniq, (0, 255))):
        raise ValueOutOfRangeError(f"mask file {path} has values outside {{0, 255}}: {uniq.tolist()}")
    return BinaryMask((arr > 0).astype(np.uint8))


def _entry_to_record(entry: ManifestEntry, base: Path) -> dict:
    return {
        "image_path": os.path.relpath(entry.image_path, base),
        "mask_path": os.path.relpath(entry.mask_path, base),
        "split": entry.split,
        "provenance": entry.provenance,
        "particles": [p.to_dict() for p in entry.particles],
        "seed": entry.seed,
    }


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write the manifest as JSON lines (header record first)."""
    path = Path(path)
    base = path.parent
    header = {"master_seed": manifest.master_seed, "scale_um_per_px": manifest.scale_um_per_px}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header) + "\n")
            for entry in manifest.entries:
                fh.write(json.dumps(_entry_to_record(entry, base)) + "\n")
    except OSError as exc:
        raise IoFailureError(f"cannot write manifest {path}: {exc}") from exc


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Read a manifest, resolving entry paths relative to the file.

    With ``check_files`` (default) every referenced image/mask must exist.
    """
    path = Path(path)
    base = path.parent
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise IoFailureError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise IoFailureError(f"manifest {path} is empty")
    try:
        header = json.loads(lines[0])
        entries = []
        for ln in lines[1:]:
            rec = json.loads(ln)
            entries.append(ManifestEntry(
                image_path=str((base / rec["image_path"]).resolve()),
                mask_path=str((base / rec["mask_path"]).resolve()),
                split=rec["split"],
                provenance=rec["provenance"],
                particles=tuple(ParticleSpec.from_dict(p) for p in rec["particles"]),
                seed=int(rec["seed"]),
            ))
        manifest = DatasetManifest(
            entries=tuple(entries),
            master_seed=int(header["master_seed"]),
            scale_um_per_px=float(header["scale_um_per_px"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise IoFailureError(f"manifest {path} is malformed: {exc}") from exc
    if check_files:
        for entry in manifest.entries:
            for p in (entry.image_path, entry.mask_path):
                if not os.path.isfile(p):
                    raise IoFailureError(f"manifest references missing file: {p}")
    return manifest
