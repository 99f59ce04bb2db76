"""Core domain types shared by every pipeline stage.

All types are immutable after construction; derived stages build new values
instead of mutating. Pixel data lives in numpy arrays that are frozen
(writeable=False) on construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError, ValueOutOfRangeError

N_CHANNELS = 3  # model contract: every image is H x W x 3
DEFAULT_SCALE_UM_PER_PX = 5.0


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class Polymer(str, Enum):
    HDPE = "HDPE"
    PET = "PET"
    OTHER = "OTHER"


# Nominal particle diameters of the two spiked polymer classes, in microns.
NOMINAL_DIAMETER_UM = {Polymer.HDPE: 500.0, Polymer.PET: 120.0}


@dataclass(frozen=True)
class FluorescenceImage:
    """Multi-channel intensity raster, the model input.

    ``pixels`` is (height, width, 3), row-major. Raw images hold integral
    values in [0, 255] (stored uint8); normalized images hold floats in
    [0, 1]. ``scale_um_per_px`` is the physical calibration of one pixel.
    """

    pixels: np.ndarray
    normalized: bool = False
    scale_um_per_px: float = DEFAULT_SCALE_UM_PER_PX

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != N_CHANNELS:
            raise DimensionMismatchError(
                f"image pixels must be (H, W, {N_CHANNELS}), got shape {pixels.shape}"
            )
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DimensionMismatchError("image must be at least 1x1")
        if self.scale_um_per_px <= 0:
            raise ValueOutOfRangeError(f"scale_um_per_px must be > 0, got {self.scale_um_per_px}")
        if self.normalized:
            pixels = pixels.astype(np.float32) if pixels.dtype.kind != "f" else pixels
            lo, hi = float(pixels.min()), float(pixels.max())
            if lo < 0.0 or hi > 1.0:
                raise ValueOutOfRangeError(
                    f"normalized image values must lie in [0, 1], got [{lo}, {hi}]"
                )
        else:
            if pixels.dtype != np.uint8:
                as_float = pixels.astype(np.float64)
                if not np.array_equal(as_float, np.round(as_float)):
                    raise ValueOutOfRangeError("raw image values must be integral")
                if as_float.min() < 0 or as_float.max() > 255:
                    raise ValueOutOfRangeError("raw image values must lie in [0, 255]")
                pixels = pixels.astype(np.uint8)
        object.__setattr__(self, "pixels", _freeze(pixels))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def with_pixels(self, pixels: np.ndarray, normalized: bool) -> "FluorescenceImage":
        return FluorescenceImage(pixels, normalized=normalized, scale_um_per_px=self.scale_um_per_px)


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel microplastic (1) / background (0) labeling.

    In memory values are {0, 1} uint8; on disk 1 maps to 255 (white).
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DimensionMismatchError(f"mask must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatchError("mask must be at least 1x1")
        uniq = np.unique(values)
        if not np.all(np.isin(uniq, (0, 1))):
            raise ValueOutOfRangeError(f"mask values must be in {{0, 1}}, got {uniq.tolist()}")
        object.__setattr__(self, "values", _freeze(values.astype(np.uint8)))

    @classmethod
    def zeros(cls, height: int, width: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def from_bool(cls, arr: np.ndarray) -> "BinaryMask":
        return cls(np.asarray(arr, dtype=bool).astype(np.uint8))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def foreground_count(self) -> int:
        return int(self.values.sum())


@dataclass(frozen=True)
class PatchGrid:
    """Tiling geometry binding an original raster to its padded patch layout.

    Invariants: (original + pad) is divisible by patch_size on both axes,
    padding is strictly less than one patch, and rows/cols count the tiles.
    """

    patch_size: int
    original_w: int
    original_h: int
    pad_w: int
    pad_h: int
    rows: int
    cols: int

    def __post_init__(self):
        p = self.patch_size
        if p < 1 or self.original_w < 1 or self.original_h < 1:
            raise ValueOutOfRangeError("patch_size and original dims must be >= 1")
        if not (0 <= self.pad_w < p and 0 <= self.pad_h < p):
            raise ValueOutOfRangeError(f"padding must satisfy 0 <= pad < {p}")
        if (self.original_w + self.pad_w) % p != 0 or (self.original_h + self.pad_h) % p != 0:
            raise DimensionMismatchError("padded dimensions must be divisible by patch_size")
        if self.cols != (self.original_w + self.pad_w) // p or self.rows != (self.original_h + self.pad_h) // p:
            raise DimensionMismatchError("rows/cols inconsistent with padded dimensions")

    @property
    def padded_w(self) -> int:
        return self.original_w + self.pad_w

    @property
    def padded_h(self) -> int:
        return self.original_h + self.pad_h

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ParticleSpec:
    """Ground-truth description of one rendered particle.

    ``diameter_um`` is the major-axis (max caliper) diameter; the minor axis
    follows from ``eccentricity``. ``center`` is (x, y) in subpixel image
    coordinates, ``rotation`` in radians, ``peak_intensity`` in (0, 1].
    """

    polymer: Polymer
    diameter_um: float
    center: tuple[float, float]
    eccentricity: float = 0.0
    rotation: float = 0.0
    peak_intensity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "polymer", Polymer(self.polymer))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.diameter_um <= 0:
            raise ValueOutOfRangeError(f"diameter_um must be > 0, got {self.diameter_um}")
        if not (0.0 <= self.eccentricity < 1.0):
            raise ValueOutOfRangeError(f"eccentricity must be in [0, 1), got {self.eccentricity}")
        if not (0.0 < self.peak_intensity <= 1.0):
            raise ValueOutOfRangeError(f"peak_intensity must be in (0, 1], got {self.peak_intensity}")

    def diameter_px(self, scale_um_per_px: float) -> float:
        return self.diameter_um / scale_um_per_px

    def to_dict(self) -> dict:
        return {
            "polymer": self.polymer.value,
            "diameter_um": self.diameter_um,
            "center": [self.center[0], self.center[1]],
            "eccentricity": self.eccentricity,
            "rotation": self.rotation,
            "peak_intensity": self.peak_intensity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParticleSpec":
        return cls(
            polymer=Polymer(d["polymer"]),
            diameter_um=float(d["diameter_um"]),
            center=(float(d["center"][0]), float(d["center"][1])),
            eccentricity=float(d["eccentricity"]),
            rotation=float(d["rotation"]),
            peak_intensity=float(d["peak_intensity"]),
        )


@dataclass(frozen=True)
class Detection:
    """One connected component extracted from a mask.

    ``bbox`` is (x0, y0, x1, y1) with inclusive pixel indices, so its area is
    (x1 - x0 + 1) * (y1 - y0 + 1). ``feret_px`` is the max caliper distance
    between pixel centers; ``feret_um`` its physical equivalent.
    """

    id: int
    pixel_area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    feret_px: float
    feret_um: float

    def __post_init__(self):
        if self.pixel_area < 1:
            raise ValueOutOfRangeError("pixel_area must be >= 1")
        x0, y0, x1, y1 = self.bbox
        if self.pixel_area > (x1 - x0 + 1) * (y1 - y0 + 1):
            raise ValueOutOfRangeError("pixel_area exceeds bbox area")
        if self.feret_px < 0 or self.feret_um < 0:
            raise ValueOutOfRangeError("feret diameters must be >= 0")


def _safe_div(num: float, den: float, empty_value: float) -> float:
    return num / den if den > 0 else empty_value


@dataclass(frozen=True)
class MetricsReport:
    """Pixel confusion counts plus the derived segmentation metrics.

    Empty-set convention: if tp + fp + fn == 0 (all-background truth and
    prediction), iou, f1, precision, and recall are all defined as 1.0.
    """

    tp: int
    fp: int
    fn: int
    tn: int
    iou: float
    f1: float
    precision: float
    recall: float
    accuracy: float

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueOutOfRangeError(f"{name} must be non-negative")

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "MetricsReport":
        tp, fp, fn, tn = int(tp), int(fp), int(fn), int(tn)
        total = tp + fp + fn + tn
        if tp + fp + fn == 0:
            iou = precision = recall = f1 = 1.0
        else:
            precision = _safe_div(tp, tp + fp, 0.0)
            recall = _safe_div(tp, tp + fn, 0.0)
            iou = tp / (tp + fp + fn)
            f1 = _safe_div(2 * precision * recall, precision + recall, 0.0)
        accuracy = _safe_div(tp + tn, total, 1.0)
        return cls(tp=tp, fp=fp, fn=fn, tn=tn, iou=iou, f1=f1,
                   precision=precision, recall=recall, accuracy=accuracy)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "iou": self.iou, "f1": self.f1, "precision": self.precision,
            "recall": self.recall, "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset record: an image/mask pair plus its ground truth."""

    image_path: str
    mask_path: str
    split: str  # "train" | "test"
    provenance: str  # "spiked" | "real"
    particles: tuple[ParticleSpec, ...]
    seed: int

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueOutOfRangeError(f"split must be 'train' or 'test', got {self.split!r}")
        if self.provenance not in ("spiked", "real"):
            raise ValueOutOfRangeError(f"provenance must be 'spiked' or 'real', got {self.provenance!r}")
        object.__setattr__(self, "particles", tuple(self.particles))


@dataclass(frozen=True)
class DatasetManifest:
    """Catalog binding images, masks, splits, and particle ground truth."""

    entries: tuple[ManifestEntry, ...]
    master_seed: int
    scale_um_per_px: float = DEFAULT_SCALE_UM_PER_PX

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.scale_um_per_px <= 0:
            raise ValueOutOfRangeError("scale_um_per_px must be > 0")

    def __len__(self) -> int:
        return len(self.entries)

    def for_split(self, split: str) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.split == split)

    @property
    def train_entries(self) -> tuple[ManifestEntry, ...]:
        return self.for_split("train")

    @property
    def test_entries(self) -> tuple[ManifestEntry, ...]:
        return self.for_split("test")

    def with_entries(self, entries) -> "DatasetManifest":
        return replace(self, entries=tuple(entries))


def validate_pair(image: FluorescenceImage, mask: BinaryMask) -> None:
    """Check that an image and mask form a consistent pair.

    Raises DimensionMismatchError when their shapes differ. Value-range
    violations are impossible for constructed instances, but arrays smuggled
    past the constructors are re-checked here.
    """
    if (image.height, image.width) != (mask.height, mask.width):
        raise DimensionMismatchError(
            f"image is {image.width}x{image.height}, mask is {mask.width}x{mask.height}"
        )
    uniq = np.unique(mask.values)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ValueOutOfRangeError(f"mask values must be in {{0, 1}}, got {uniq.tolist()}")
    if image.normalized:
        if float(image.pixels.min()) < 0.0 or float(image.pixels.max()) > 1.0:
            raise ValueOutOfRangeError("normalized image values out of [0, 1]")
    elif image.pixels.dtype != np.uint8:
        raise ValueOutOfRangeError("raw image pixels must be uint8")
