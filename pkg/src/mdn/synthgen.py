"""Deterministic synthetic fluorescence dataset generator.

Each image is built from three layers: a dim "blood matrix" background
(constant base plus soft autofluorescence blobs), bright elliptical particles
with a Gaussian edge falloff, and sensor noise (Gaussian, optionally Poisson
shot noise). The ground-truth mask thresholds each particle's falloff at 50%
of its peak, so mask geometry is analytic: a particle of major diameter d
covers an ellipse of exactly that caliper size.

Everything derives from (master_seed, image index) through a SHA-256 seed
hash, so generation is reproducible byte for byte and parallelizable per
image.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    BinaryMask,
    DatasetManifest,
    FluorescenceImage,
    ManifestEntry,
    NOMINAL_DIAMETER_UM,
    ParticleSpec,
    Polymer,
)
from .errors import DegenerateSplitError, InvalidConfigError, ParticleTooSmallError
from .fileio import save_image, save_manifest, save_mask

# Particle peak intensities are sampled from this range. Config validation
# pins the background ceiling far enough below PEAK_FLOOR that masks stay
# separable from background by construction.
PEAK_FLOOR = 0.7
PEAK_CEIL = 1.0
MIN_CONTRAST_GAP = 0.2

# Relative diameter jitter applied around each polymer's nominal size.
DIAMETER_JITTER = 0.1

# Warm Nile-Red-like emission for particles; duller red-brown matrix tint.
SIGNAL_TINT = (1.0, 0.62, 0.18)
MATRIX_TINT = (0.85, 0.38, 0.30)

POLYMER_ORDER = (Polymer.HDPE, Polymer.PET)


@dataclass(frozen=True)
class BackgroundConfig:
    base_intensity: float = 0.08
    autofluorescence_blob_count: tuple[int, int] = (2, 5)
    blob_intensity: float = 0.15


@dataclass(frozen=True)
class NoiseConfig:
    gaussian_sigma: float = 0.02
    poisson_enabled: bool = False


@dataclass(frozen=True)
class GenConfig:
    """Parameters of the synthetic spiked dataset."""

    n_images: int = 250
    image_w: int = 256
    image_h: int = 256
    particles_per_image: tuple[int, int] = (1, 3)
    polymer_mix: dict | None = None  # weights over {"HDPE", "PET"}
    background: BackgroundConfig = BackgroundConfig()
    noise: NoiseConfig = NoiseConfig()
    master_seed: int = 0
    scale_um_per_px: float = 5.0

    def __post_init__(self):
        if self.polymer_mix is None:
            object.__setattr__(self, "polymer_mix", {"HDPE": 0.5, "PET": 0.5})
        if self.n_images < 1:
            raise InvalidConfigError("n_images must be >= 1")
        if self.image_w < 1 or self.image_h < 1:
            raise InvalidConfigError("image dimensions must be >= 1")
        lo, hi = self.particles_per_image
        if lo < 0 or hi < lo:
            raise InvalidConfigError(f"particles_per_image range invalid: [{lo}, {hi}]")
        if self.scale_um_per_px <= 0:
            raise InvalidConfigError("scale_um_per_px must be > 0")
        unknown = set(self.polymer_mix) - {p.value for p in POLYMER_ORDER}
        if unknown:
            raise InvalidConfigError(f"polymer_mix has unknown polymers: {sorted(unknown)}")
        weight_sum = sum(self.polymer_mix.values())
        if abs(weight_sum - 1.0) > 1e-9:
            raise InvalidConfigError(f"polymer_mix weights must sum to 1, got {weight_sum}")
        if any(w < 0 for w in self.polymer_mix.values()):
            raise InvalidConfigError("polymer_mix weights must be non-negative")
        bg = self.background
        if not (0.0 <= bg.base_intensity <= 1.0 and 0.0 <= bg.blob_intensity <= 1.0):
            raise InvalidConfigError("background intensities must lie in [0, 1]")
        blo, bhi = bg.autofluorescence_blob_count
        if blo < 0 or bhi < blo:
            raise InvalidConfigError("autofluorescence_blob_count range invalid")
        if self.noise.gaussian_sigma < 0:
            raise InvalidConfigError("gaussian_sigma must be >= 0")
        ceiling = bg.base_intensity + bg.blob_intensity
        if ceiling > PEAK_FLOOR - MIN_CONTRAST_GAP:
            raise InvalidConfigError(
                f"background ceiling {ceiling:.3f} leaves less than the required "
                f"{MIN_CONTRAST_GAP} contrast gap below the particle peak floor {PEAK_FLOOR}"
            )
        if bg.blob_intensity > PEAK_FLOOR / 2:
            raise InvalidConfigError(
                f"blob_intensity {bg.blob_intensity} exceeds half the particle peak floor; "
                "mask pixels would no longer dominate background pixels"
            )

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "image_w": self.image_w,
            "image_h": self.image_h,
            "particles_per_image": list(self.particles_per_image),
            "polymer_mix": dict(self.polymer_mix),
            "background": {
                "base_intensity": self.background.base_intensity,
                "autofluorescence_blob_count": list(self.background.autofluorescence_blob_count),
                "blob_intensity": self.background.blob_intensity,
            },
            "noise": {
                "gaussian_sigma": self.noise.gaussian_sigma,
                "poisson_enabled": self.noise.poisson_enabled,
            },
            "master_seed": self.master_seed,
            "scale_um_per_px": self.scale_um_per_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        allowed = {"n_images", "image_w", "image_h", "particles_per_image", "polymer_mix",
                   "background", "noise", "master_seed", "scale_um_per_px"}
        unknown = set(d) - allowed
        if unknown:
            raise InvalidConfigError(f"unknown GenConfig fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "particles_per_image" in kwargs:
            kwargs["particles_per_image"] = tuple(int(v) for v in kwargs["particles_per_image"])
        if "background" in kwargs:
            bg = dict(kwargs["background"])
            bad = set(bg) - {"base_intensity", "autofluorescence_blob_count", "blob_intensity"}
            if bad:
                raise InvalidConfigError(f"unknown background fields: {sorted(bad)}")
            if "autofluorescence_blob_count" in bg:
                bg["autofluorescence_blob_count"] = tuple(int(v) for v in bg["autofluorescence_blob_count"])
            kwargs["background"] = BackgroundConfig(**bg)
        if "noise" in kwargs:
            nz = dict(kwargs["noise"])
            bad = set(nz) - {"gaussian_sigma", "poisson_enabled"}
            if bad:
                raise InvalidConfigError(f"unknown noise fields: {sorted(bad)}")
            kwargs["noise"] = NoiseConfig(**nz)
        return cls(**kwargs)


def easy_preset(n_images: int = 250, master_seed: int = 42, size: int = 256) -> GenConfig:
    """Separable, moderately noisy dataset used for the threshold runs."""
    return GenConfig(n_images=n_images, image_w=size, image_h=size, master_seed=master_seed)


def hard_preset(n_images: int = 250, master_seed: int = 42, size: int = 256) -> GenConfig:
    """Busier stand-in for real-sample variability: more blobs, more noise."""
    return GenConfig(
        n_images=n_images,
        image_w=size,
        image_h=size,
        particles_per_image=(0, 4),
        background=BackgroundConfig(
            base_intensity=0.12,
            autofluorescence_blob_count=(6, 12),
            blob_intensity=0.3,
        ),
        noise=NoiseConfig(gaussian_sigma=0.05, poisson_enabled=True),
        master_seed=master_seed,
    )


PRESETS = {"easy": easy_preset, "hard": hard_preset}


def load_gen_config(path) -> GenConfig:
    """Read a GenConfig from a JSON file with exactly the documented fields."""
    with open(path, "r", encoding="utf-8") as fh:
        return GenConfig.from_dict(json.load(fh))


def derive_seed(master_seed: int, *parts: int) -> int:
    """Stable per-item seed from a master seed plus index parts (SHA-256)."""
    payload = "mdn:" + ":".join(str(int(v)) for v in (master_seed, *parts))
    digest = hashlib.sha256(payload.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def _sample_particle(rng: np.random.Generator, config: GenConfig) -> ParticleSpec:
    polymers = [p.value for p in POLYMER_ORDER]
    weights = np.array([config.polymer_mix.get(p, 0.0) for p in polymers], dtype=np.float64)
    weights = weights / weights.sum()
    polymer = Polymer(polymers[int(rng.choice(len(polymers), p=weights))])
    diameter_um = NOMINAL_DIAMETER_UM[polymer] * rng.uniform(1 - DIAMETER_JITTER, 1 + DIAMETER_JITTER)

    # Keep the particle fully inside the frame when it fits; else center it.
    # The draw count is fixed so the stream stays aligned across branches.
    a = diameter_um / config.scale_um_per_px / 2.0
    w, h = float(config.image_w), float(config.image_h)
    x_lo, x_hi = (a, w - a) if w > 2 * a else (w / 2, w / 2)
    y_lo, y_hi = (a, h - a) if h > 2 * a else (h / 2, h / 2)
    cx = x_lo + rng.uniform() * (x_hi - x_lo)
    cy = y_lo + rng.uniform() * (y_hi - y_lo)

    eccentricity = rng.uniform(0.0, 0.6)
    rotation = rng.uniform(0.0, math.pi)
    peak = rng.uniform(PEAK_FLOOR, PEAK_CEIL)
    return ParticleSpec(
        polymer=polymer,
        diameter_um=diameter_um,
        center=(cx, cy),
        eccentricity=eccentricity,
        rotation=rotation,
        peak_intensity=peak,
    )


def render_particle(spec: ParticleSpec, shape: tuple[int, int], scale_um_per_px: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Render one particle's intensity contribution and its mask.

    Returns (field, mask): ``field`` is peak * exp(-ln2 * r^2) truncated at
    r = 2, where r is the normalized elliptical radius, so the 50%-of-peak
    level sits exactly on the ellipse boundary; ``mask`` is field > 50% peak.
    """
    h, w = shape
    a = spec.diameter_px(scale_um_per_px) / 2.0
    if 2 * a < 1.0:
        raise ParticleTooSmallError(
            f"{spec.polymer.value} particle of {spec.diameter_um} um renders at "
            f"{2 * a:.2f} px (< 1 px) at {scale_um_per_px} um/px"
        )
    b = a * math.sqrt(1.0 - spec.eccentricity ** 2)
    cx, cy = spec.center
    cos_t, sin_t = math.cos(spec.rotation), math.sin(spec.rotation)

    # Evaluate only inside the truncation bounding box (r <= 2).
    reach = 2.0 * a
    x0 = max(0, int(math.floor(cx - reach)))
    x1 = min(w - 1, int(math.ceil(cx + reach)))
    y0 = max(0, int(math.floor(cy - reach)))
    y1 = min(h - 1, int(math.ceil(cy + reach)))
    field = np.zeros(shape, dtype=np.float64)
    mask = np.zeros(shape, dtype=bool)
    if x1 < x0 or y1 < y0:
        return field, mask

    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    dx = xs - cx
    dy = ys - cy
    u = (dx * cos_t + dy * sin_t) / a
    v = (-dx * sin_t + dy * cos_t) / b
    r2 = u * u + v * v
    local = np.where(r2 <= 4.0, spec.peak_intensity * np.exp(-math.log(2.0) * r2), 0.0)
    field[y0:y1 + 1, x0:x1 + 1] = local
    mask[y0:y1 + 1, x0:x1 + 1] = local > 0.5 * spec.peak_intensity
    return field, mask


def _dilate8(mask: np.ndarray) -> np.ndarray:
    """3x3 (8-neighborhood) binary dilation."""
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    out = np.zeros_like(mask)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            out |= padded[dy:dy + mask.shape[0], dx:dx + mask.shape[1]]
    return out


@dataclass(frozen=True)
class SceneRecord:
    """Full ground truth of one generated image, including pre-noise fields."""

    image: FluorescenceImage
    mask: BinaryMask
    particles: tuple[ParticleSpec, ...]
    luminance: np.ndarray       # pre-noise scalar intensity, (H, W) float64
    particle_field: np.ndarray  # pre-noise particle contribution, (H, W) float64
    overlapped: bool            # any two particle masks touch or intersect


def render_scene(config: GenConfig, index: int) -> SceneRecord:
    """Render image ``index`` of the configured dataset with full ground truth."""
    if not (0 <= index < config.n_images):
        raise InvalidConfigError(f"index {index} outside [0, {config.n_images})")
    rng = np.random.default_rng(derive_seed(config.master_seed, index))
    h, w = config.image_h, config.image_w
    shape = (h, w)

    lo, hi = config.particles_per_image
    n_particles = int(rng.integers(lo, hi + 1))
    specs = tuple(_sample_particle(rng, config) for _ in range(n_particles))

    particle_field = np.zeros(shape, dtype=np.float64)
    particle_masks = []
    for spec in specs:
        field, pmask = render_particle(spec, shape, config.scale_um_per_px)
        particle_field = np.maximum(particle_field, field)
        particle_masks.append(pmask)

    mask_arr = np.zeros(shape, dtype=bool)
    for pmask in particle_masks:
        mask_arr |= pmask
    overlapped = False
    for i in range(len(particle_masks)):
        grown = _dilate8(particle_masks[i])
        for j in range(i + 1, len(particle_masks)):
            if np.any(grown & particle_masks[j]):
                overlapped = True
                break
        if overlapped:
            break

    bg = config.background
    blob_field = np.zeros(shape, dtype=np.float64)
    n_blobs = int(rng.integers(bg.autofluorescence_blob_count[0], bg.autofluorescence_blob_count[1] + 1))
    min_dim = float(min(w, h))
    for _ in range(n_blobs):
        bx = rng.uniform(0.0, w)
        by = rng.uniform(0.0, h)
        sigma = rng.uniform(0.03, 0.15) * min_dim
        amp = rng.uniform(0.3, 1.0)
        ys, xs = np.ogrid[0:h, 0:w]
        blob_field += amp * np.exp(-((xs - bx) ** 2 + (ys - by) ** 2) / (2.0 * sigma ** 2))
    blob_contrib = bg.blob_intensity * np.clip(blob_field, 0.0, 1.0)

    background_scalar = bg.base_intensity + blob_contrib
    luminance = np.clip(background_scalar + particle_field, 0.0, 1.0)

    rgb = np.empty((h, w, 3), dtype=np.float64)
    for c in range(3):
        rgb[:, :, c] = np.clip(
            background_scalar * MATRIX_TINT[c] + particle_field * SIGNAL_TINT[c], 0.0, 1.0
        )

    if config.noise.poisson_enabled:
        rgb = rng.poisson(rgb * 255.0).astype(np.float64) / 255.0
    if config.noise.gaussian_sigma > 0:
        rgb = rgb + rng.normal(0.0, config.noise.gaussian_sigma, size=rgb.shape)
    pixels = np.clip(np.round(np.clip(rgb, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)

    image = FluorescenceImage(pixels, normalized=False, scale_um_per_px=config.scale_um_per_px)
    return SceneRecord(
        image=image,
        mask=BinaryMask.from_bool(mask_arr),
        particles=specs,
        luminance=luminance,
        particle_field=particle_field,
        overlapped=overlapped,
    )


def generate_image(config: GenConfig, index: int
                   ) -> tuple[FluorescenceImage, BinaryMask, tuple[ParticleSpec, ...]]:
    """Generate image ``index``: a pure function of (master_seed, index)."""
    scene = render_scene(config, index)
    return scene.image, scene.mask, scene.particles


def generate_dataset(config: GenConfig, out_dir, provenance: str = "spiked") -> DatasetManifest:
    """Write n_images image/mask pairs plus a manifest under ``out_dir``.

    Layout: images/img_#####.png, masks/img_#####_mask.png, manifest.jsonl.
    All entries start in the train split; apply split_dataset afterwards.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    masks_dir = out_dir / "masks"
    images_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for index in range(config.n_images):
        image, mask, specs = generate_image(config, index)
        stem = f"img_{index:05d}"
        image_path = images_dir / f"{stem}.png"
        mask_path = masks_dir / f"{stem}_mask.png"
        save_image(image, image_path)
        save_mask(mask, mask_path)
        entries.append(ManifestEntry(
            image_path=str(image_path.resolve()),
            mask_path=str(mask_path.resolve()),
            split="train",
            provenance=provenance,
            particles=specs,
            seed=derive_seed(config.master_seed, index),
        ))
    manifest = DatasetManifest(
        entries=tuple(entries),
        master_seed=config.master_seed,
        scale_um_per_px=config.scale_um_per_px,
    )
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def split_dataset(manifest: DatasetManifest, train_fraction: float, seed: int) -> DatasetManifest:
    """Re-tag entries train/test by a seeded shuffle.

    |train| = round(train_fraction * n) with half-up rounding; raises
    DegenerateSplitError when either side would be empty.
    """
    if not (0.0 < train_fraction < 1.0):
        raise InvalidConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(manifest.entries)
    n_train = int(math.floor(train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise DegenerateSplitError(
            f"splitting {n} entries at fraction {train_fraction} leaves an empty side"
        )
    order = np.random.default_rng(seed).permutation(n)
    train_idx = set(order[:n_train].tolist())
    entries = tuple(
        replace(entry, split="train" if i in train_idx else "test")
        for i, entry in enumerate(manifest.entries)
    )
    return manifest.with_entries(entries)


def resave_manifest(manifest: DatasetManifest, out_dir) -> Path:
    """Write the manifest (e.g. after splitting) back under its dataset dir."""
    path = Path(out_dir) / "manifest.jsonl"
    save_manifest(manifest, path)
    return path
