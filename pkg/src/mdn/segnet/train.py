"""Training loop: seeded shuffling, momentum SGD, per-epoch validation IoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..core import BinaryMask, DatasetManifest, FluorescenceImage, MetricsReport
from ..errors import EmptySplitError, InvalidConfigError
from ..fileio import load_image, load_mask
from ..preprocess import normalize, pad_to_grid, stitch, tile
from .losses import LossKind, segmentation_loss
from .model import UNet
from .optim import MomentumSGD


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 35
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    loss: LossKind = LossKind.BCE_PLUS_DICE
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.epochs < 0:
            raise InvalidConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning_rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidConfigError("momentum must lie in [0, 1)")
        if not (0.0 < self.threshold < 1.0):
            raise InvalidConfigError("threshold must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "seed": self.seed,
            "loss": self.loss.value,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        allowed = {"epochs", "batch_size", "learning_rate", "momentum", "seed", "loss", "threshold"}
        unknown = set(d) - allowed
        if unknown:
            raise InvalidConfigError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)


def _pair_to_patches(image: FluorescenceImage, mask: BinaryMask, patch_size: int):
    """Normalize, pad, and tile one image/mask pair into aligned patches."""
    if not image.normalized:
        image = normalize(image)
    padded_img, grid = pad_to_grid(image.pixels, patch_size)
    padded_mask, _ = pad_to_grid(mask.values, patch_size)
    x_patches = tile(padded_img, grid)
    y_patches = tile(padded_mask, grid)
    return x_patches, y_patches, grid


def load_split_patches(manifest: DatasetManifest, split: str, patch_size: int
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Stack every P x P patch of a split into (N, P, P, 3) / (N, P, P) arrays."""
    entries = manifest.for_split(split)
    if not entries:
        raise EmptySplitError(f"manifest has no '{split}' entries")
    xs, ys = [], []
    for entry in entries:
        image = load_image(entry.image_path, scale_um_per_px=manifest.scale_um_per_px)
        mask = load_mask(entry.mask_path)
        x_patches, y_patches, _ = _pair_to_patches(image, mask, patch_size)
        xs.extend(x_patches)
        ys.extend(y_patches)
    return (np.stack(xs).astype(np.float32), np.stack(ys).astype(np.float32))


def _validation_iou(model: UNet, val_set, threshold: float) -> float:
    """Micro IoU over the prepared validation set (summed confusion counts)."""
    tp = fp = fn = tn = 0
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        for x, grid, gt in val_set:
            probs = torch.sigmoid(model(x.to(dtype)))[:, 0].numpy()
            stitched = stitch(list(probs), grid)
            pred = stitched > threshold
            gt_b = gt.astype(bool)
            tp += int(np.count_nonzero(pred & gt_b))
            fp += int(np.count_nonzero(pred & ~gt_b))
            fn += int(np.count_nonzero(~pred & gt_b))
            tn += int(np.count_nonzero(~pred & ~gt_b))
    return MetricsReport.from_counts(tp, fp, fn, tn).iou


def train(model: UNet, manifest: DatasetManifest, cfg: TrainConfig
          ) -> tuple[UNet, list[dict]]:
    """Train in place for cfg.epochs passes over the seeded-shuffled train split.

    History holds one record per epoch: {"epoch", "train_loss", "val_iou"},
    where val_iou is micro IoU over the manifest's test split (None when the
    manifest has no test entries). Deterministic given cfg.seed on a fixed
    platform.
    """
    patch_size = model.config.input_size
    x_np, y_np = load_split_patches(manifest, "train", patch_size)
    n = x_np.shape[0]
    if cfg.batch_size > n:
        raise InvalidConfigError(
            f"batch_size {cfg.batch_size} exceeds training-set size {n} after split"
        )
    dtype = next(model.parameters()).dtype
    x_all = torch.from_numpy(x_np).permute(0, 3, 1, 2).to(dtype)
    y_all = torch.from_numpy(y_np).unsqueeze(1).to(dtype)

    val_set = []
    for entry in manifest.test_entries:
        image = load_image(entry.image_path, scale_um_per_px=manifest.scale_um_per_px)
        mask = load_mask(entry.mask_path)
        x_patches, _, grid = _pair_to_patches(image, mask, patch_size)
        x = torch.from_numpy(np.stack(x_patches).astype(np.float32)).permute(0, 3, 1, 2)
        val_set.append((x, grid, mask.values))

    optimizer = MomentumSGD(model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(perm[start:start + cfg.batch_size].copy())
            xb = x_all[idx]
            yb = y_all[idx]
            optimizer.zero_grad()
            probs = torch.sigmoid(model(xb))
            loss = segmentation_loss(probs, yb, cfg.loss)
            loss.backward()
            optimizer.step()
            loss_sum += float(loss.detach()) * len(idx)
        model.eval()
        val_iou = _validation_iou(model, val_set, cfg.threshold) if val_set else None
        history.append({
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "val_iou": val_iou,
        })
    return model, history
