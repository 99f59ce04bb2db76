"""Particle-level analysis: component labeling, feret diameter, size bins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import BinaryMask, Detection
from ..errors import InvalidBinsError, ValueOutOfRangeError


def _find_root(parent: list[int], label: int) -> int:
    root = label
    while parent[root] != root:
        root = parent[root]
    while parent[label] != root:  # path compression
        parent[label], label = root, parent[label]
    return root


def _union(parent: list[int], a: int, b: int) -> None:
    ra, rb = _find_root(parent, a), _find_root(parent, b)
    if ra != rb:
        parent[max(ra, rb)] = min(ra, rb)


def label_components(mask: BinaryMask, connectivity: int = 8) -> np.ndarray:
    """Two-pass connected-component labeling.

    Returns an int array where background is 0 and each component carries a
    label 1..n in order of first appearance (row-major scan).
    """
    if connectivity not in (4, 8):
        raise ValueOutOfRangeError(f"connectivity must be 4 or 8, got {connectivity}")
    values = mask.values
    h, w = values.shape
    labels = np.zeros((h, w), dtype=np.int64)
    parent = [0]  # parent[i] for provisional label i; 0 unused
    next_label = 1

    # First pass: provisional labels from already-scanned neighbors.
    fg = np.argwhere(values != 0)
    for y, x in fg:
        neighbors = []
        if x > 0 and labels[y, x - 1]:
            neighbors.append(labels[y, x - 1])
        if y > 0:
            if labels[y - 1, x]:
                neighbors.append(labels[y - 1, x])
            if connectivity == 8:
                if x > 0 and labels[y - 1, x - 1]:
                    neighbors.append(labels[y - 1, x - 1])
                if x < w - 1 and labels[y - 1, x + 1]:
                    neighbors.append(labels[y - 1, x + 1])
        if not neighbors:
            labels[y, x] = next_label
            parent.append(next_label)
            next_label += 1
        else:
            smallest = min(neighbors)
            labels[y, x] = smallest
            for nb in neighbors:
                _union(parent, smallest, nb)

    # Second pass: resolve equivalences, renumber by first appearance.
    remap: dict[int, int] = {}
    for y, x in fg:
        root = _find_root(parent, labels[y, x])
        if root not in remap:
            remap[root] = len(remap) + 1
        labels[y, x] = remap[root]
    return labels


def feret_diameter(pixels) -> float:
    """Max pairwise Euclidean distance between pixel centers of a component.

    ``pixels`` is an (N, 2) array of (row, col) coordinates. Computed on the
    component's convex hull; a single pixel yields 0.0.
    """
    pts = np.asarray(pixels, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueOutOfRangeError("pixels must be a non-empty (N, 2) array")
    if pts.shape[0] == 1:
        return 0.0
    hull = _convex_hull(pts)
    diff = hull[:, None, :] - hull[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain over unique points; handles collinear input."""
    uniq = np.unique(pts, axis=0)
    if uniq.shape[0] <= 2:
        return uniq
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    p = uniq[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for pt in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], pt) <= 0:
            lower.pop()
        lower.append(pt)
    upper: list[np.ndarray] = []
    for pt in p[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], pt) <= 0:
            upper.pop()
        upper.append(pt)
    return np.array(lower[:-1] + upper[:-1])


def connected_components(mask: BinaryMask, connectivity: int = 8,
                         scale_um_per_px: float = 1.0) -> list[Detection]:
    """Extract one Detection per connected component (default 8-connectivity).

    Detections are ordered by first appearance in a row-major scan; ids are
    1-based. Centroids and bboxes use (x, y) = (col, row) with inclusive
    bbox bounds.
    """
    labels = label_components(mask, connectivity)
    n = int(labels.max())
    detections = []
    for label in range(1, n + 1):
        ys, xs = np.nonzero(labels == label)
        coords = np.stack([ys, xs], axis=1)
        feret_px = feret_diameter(coords)
        detections.append(Detection(
            id=label,
            pixel_area=int(len(ys)),
            centroid=(float(xs.mean()), float(ys.mean())),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
            feret_px=feret_px,
            feret_um=feret_px * scale_um_per_px,
        ))
    return detections


@dataclass(frozen=True)
class SizeReport:
    """Histogram of particle feret diameters over micron-threshold bins.

    ``bin_edges_um`` with k edges defines k+1 bins: (-inf, e1), [e1, e2),
    ..., [ek, inf). ``counts`` always sums to ``total``.
    """

    bin_edges_um: tuple[float, ...]
    counts: tuple[int, ...]
    total: int

    def bin_label(self, i: int) -> str:
        edges = self.bin_edges_um
        if i == 0:
            return f"< {edges[0]:g} um"
        if i == len(edges):
            return f">= {edges[-1]:g} um"
        return f"[{edges[i - 1]:g}, {edges[i]:g}) um"


def size_report(detections, scale_um_per_px: float, bins) -> SizeReport:
    """Bin detections by physical feret diameter (feret_px * scale)."""
    detections = list(detections)
    edges = [float(b) for b in bins]
    if not edges or any(b >= a for b, a in zip(edges, edges[1:])):
        raise InvalidBinsError(f"bins must be non-empty and strictly increasing, got {bins}")
    counts = [0] * (len(edges) + 1)
    for det in detections:
        feret_um = det.feret_px * scale_um_per_px
        counts[int(np.searchsorted(edges, feret_um, side="right"))] += 1
    return SizeReport(
        bin_edges_um=tuple(edges),
        counts=tuple(counts),
        total=len(detections),
    )
