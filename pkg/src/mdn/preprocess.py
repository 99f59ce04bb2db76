"""Image preparation: normalization, resizing, padding, and patch tiling.

Padding follows A = (P - (dim mod P)) mod P, i.e. the smallest non-negative
amount that makes the dimension divisible by the patch size (dimensions that
are already divisible get zero padding rather than a full extra patch).
Padding is appended on the right and bottom only with zero fill, so pixel
coordinates in the original region are preserved and stitch o tile o pad is
an exact identity there.
"""

from __future__ import annotations

import numpy as np

from .core import BinaryMask, FluorescenceImage, PatchGrid
from .errors import (
    AlreadyNormalizedError,
    GridMismatchError,
    PatchCountMismatchError,
    ValueOutOfRangeError,
)


def normalize(image: FluorescenceImage) -> FluorescenceImage:
    """Per-image global min-max scaling to [0, 1].

    v' = (v - min) / (max - min); a constant image maps to all zeros.
    """
    if image.normalized:
        raise AlreadyNormalizedError("image is already normalized")
    arr = image.pixels.astype(np.float32)
    lo = arr.min()
    hi = arr.max()
    if hi > lo:
        out = (arr - lo) / (hi - lo)
    else:
        out = np.zeros_like(arr)
    return image.with_pixels(out, normalized=True)


def _corner_aligned_positions(n_out: int, n_in: int) -> np.ndarray:
    """Sample positions mapping output index i to input coordinate space.

    Corner-aligned: 0 -> 0 and (n_out - 1) -> (n_in - 1). Degenerate axes
    (single input or output sample) collapse to position 0.
    """
    if n_out == 1 or n_in == 1:
        return np.zeros(n_out, dtype=np.float64)
    return np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)


def bilinear_resize_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling of a 2-D or (H, W, C) array."""
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    ys = _corner_aligned_positions(out_h, arr.shape[0])
    xs = _corner_aligned_positions(out_w, arr.shape[1])
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, arr.shape[0] - 1)
    x1 = np.minimum(x0 + 1, arr.shape[1] - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    a = arr.astype(np.float64)
    top = a[y0][:, x0] * (1 - wx) + a[y0][:, x1] * wx
    bot = a[y1][:, x0] * (1 - wx) + a[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return out[:, :, 0] if squeeze else out


def resize(image: FluorescenceImage, target: int) -> FluorescenceImage:
    """Bilinear resize to target x target (corner-aligned sampling).

    Raw images are rounded back to integral 8-bit values; normalized images
    stay floating point.
    """
    if target < 1:
        raise ValueOutOfRangeError(f"target size must be >= 1, got {target}")
    out = bilinear_resize_array(image.pixels, target, target)
    if image.normalized:
        return image.with_pixels(np.clip(out, 0.0, 1.0).astype(np.float32), normalized=True)
    return image.with_pixels(np.clip(np.round(out), 0, 255).astype(np.uint8), normalized=False)


def resize_mask(mask: BinaryMask, target: int) -> BinaryMask:
    """Nearest-neighbor resize keeping values in {0, 1}."""
    if target < 1:
        raise ValueOutOfRangeError(f"target size must be >= 1, got {target}")
    ys = _corner_aligned_positions(target, mask.height)
    xs = _corner_aligned_positions(target, mask.width)
    yi = np.floor(ys + 0.5).astype(np.intp)
    xi = np.floor(xs + 0.5).astype(np.intp)
    return BinaryMask(mask.values[yi][:, xi])


def compute_padding(w: int, h: int, p: int) -> tuple[int, int]:
    """Padding needed to make (w, h) divisible by patch size p.

    A_W = (P - (W mod P)) mod P and likewise for height; already-divisible
    dimensions get zero.
    """
    if w < 1 or h < 1 or p < 1:
        raise ValueOutOfRangeError("w, h, p must all be >= 1")
    return (p - w % p) % p, (p - h % p) % p


def pad(raster: np.ndarray, pad_w: int, pad_h: int, patch_size: int) -> tuple[np.ndarray, PatchGrid]:
    """Append zero padding on the right/bottom edges and return the grid.

    Works for 2-D masks and (H, W, C) images alike.
    """
    h, w = raster.shape[0], raster.shape[1]
    grid = PatchGrid(
        patch_size=patch_size,
        original_w=w,
        original_h=h,
        pad_w=pad_w,
        pad_h=pad_h,
        rows=(h + pad_h) // patch_size,
        cols=(w + pad_w) // patch_size,
    )
    pad_spec = [(0, pad_h), (0, pad_w)] + [(0, 0)] * (raster.ndim - 2)
    return np.pad(raster, pad_spec, mode="constant", constant_values=0), grid


def pad_to_grid(raster: np.ndarray, patch_size: int) -> tuple[np.ndarray, PatchGrid]:
    """compute_padding + pad in one call."""
    pad_w, pad_h = compute_padding(raster.shape[1], raster.shape[0], patch_size)
    return pad(raster, pad_w, pad_h, patch_size)


def tile(padded: np.ndarray, grid: PatchGrid) -> list[np.ndarray]:
    """Cut the padded raster into row-major P x P patches."""
    if padded.shape[0] != grid.padded_h or padded.shape[1] != grid.padded_w:
        raise GridMismatchError(
            f"raster is {padded.shape[1]}x{padded.shape[0]}, "
            f"grid expects {grid.padded_w}x{grid.padded_h}"
        )
    p = grid.patch_size
    patches = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            patches.append(padded[r * p:(r + 1) * p, c * p:(c + 1) * p].copy())
    return patches


def stitch(patches: list[np.ndarray], grid: PatchGrid) -> np.ndarray:
    """Reassemble row-major patches and crop away the right/bottom padding."""
    if len(patches) != grid.n_patches:
        raise PatchCountMismatchError(f"expected {grid.n_patches} patches, got {len(patches)}")
    p = grid.patch_size
    first = np.asarray(patches[0])
    out_shape = (grid.padded_h, grid.padded_w) + first.shape[2:]
    out = np.empty(out_shape, dtype=first.dtype)
    for idx, patch in enumerate(patches):
        patch = np.asarray(patch)
        if patch.shape[:2] != (p, p):
            raise PatchCountMismatchError(f"patch {idx} has shape {patch.shape}, expected ({p}, {p}, ...)")
        r, c = divmod(idx, grid.cols)
        out[r * p:(r + 1) * p, c * p:(c + 1) * p] = patch
    return out[:grid.original_h, :grid.original_w]
