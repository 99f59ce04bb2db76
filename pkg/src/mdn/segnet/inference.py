"""Full-image mask prediction: normalize, tile, forward, stitch, threshold."""

from __future__ import annotations

import numpy as np

from ..core import BinaryMask, FluorescenceImage
from ..errors import InvalidConfigError
from ..preprocess import bilinear_resize_array, normalize, pad_to_grid, resize, stitch, tile
from .model import UNet, forward


def predict_mask(model: UNet, image: FluorescenceImage, threshold: float = 0.5,
                 mode: str = "tile", batch_size: int = 8,
                 patch_size: int | None = None) -> BinaryMask:
    """Predict a binary mask at the image's original dimensions.

    ``mode="tile"`` (default) pads the image to a multiple of the patch size,
    runs each patch through the model, and stitches the probability maps
    back; ``mode="resize"`` squeezes the whole image to the model input size
    and rescales the probability map bilinearly. Pixels with probability
    strictly above ``threshold`` become 1.
    """
    if mode not in ("tile", "resize"):
        raise InvalidConfigError(f"mode must be 'tile' or 'resize', got {mode!r}")
    if not (0.0 < threshold < 1.0):
        raise InvalidConfigError(f"threshold must lie in (0, 1), got {threshold}")
    if not image.normalized:
        image = normalize(image)
    h, w = image.height, image.width

    if mode == "resize":
        target = model.config.input_size
        small = resize(image, target)
        probs = forward(model, small.pixels[None].astype(np.float32))[0]
        full = bilinear_resize_array(probs, h, w)
        return BinaryMask.from_bool(full > threshold)

    p = patch_size if patch_size is not None else model.config.input_size
    stride = 2 ** model.config.depth
    if p < stride or p % stride != 0:
        raise InvalidConfigError(f"patch size {p} must be a positive multiple of {stride}")
    padded, grid = pad_to_grid(image.pixels.astype(np.float32), p)
    patches = np.stack(tile(padded, grid))
    prob_patches = np.empty(patches.shape[:3], dtype=np.float64)
    for start in range(0, patches.shape[0], batch_size):
        chunk = patches[start:start + batch_size]
        prob_patches[start:start + chunk.shape[0]] = forward(model, chunk)
    prob_map = stitch(list(prob_patches), grid)
    return BinaryMask.from_bool(prob_map > threshold)
