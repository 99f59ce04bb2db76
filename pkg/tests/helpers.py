"""Independent brute-force oracles shared by the unit and acceptance suites.

These deliberately avoid the library's own algorithms: components come from
BFS flood fill, feret from all-pairs distances, gradients from central
finite differences, and metrics from rational arithmetic over hand counts.
"""

from __future__ import annotations

import hashlib
from collections import deque
from fractions import Fraction
from pathlib import Path

import numpy as np
import torch

from mdn.segnet.losses import segmentation_loss


def flood_fill_components(values: np.ndarray, connectivity: int) -> list[frozenset]:
    """BFS labeling oracle; returns a list of frozensets of (y, x) pixels."""
    values = np.asarray(values)
    h, w = values.shape
    if connectivity == 4:
        offsets = ((-1, 0), (1, 0), (0, -1), (0, 1))
    else:
        offsets = tuple((dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0))
    seen = np.zeros((h, w), dtype=bool)
    components = []
    for sy in range(h):
        for sx in range(w):
            if values[sy, sx] == 0 or seen[sy, sx]:
                continue
            queue = deque([(sy, sx)])
            seen[sy, sx] = True
            pixels = []
            while queue:
                y, x = queue.popleft()
                pixels.append((y, x))
                for dy, dx in offsets:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and values[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            components.append(frozenset(pixels))
    return components


def brute_force_feret(coords) -> float:
    """All-pairs max distance oracle over (y, x) pixel coordinates."""
    pts = np.asarray(coords, dtype=np.float64)
    if pts.shape[0] < 2:
        return 0.0
    best = 0.0
    for i in range(pts.shape[0]):
        d = np.sqrt(((pts[i + 1:] - pts[i]) ** 2).sum(axis=1))
        if d.size and float(d.max()) > best:
            best = float(d.max())
    return best


def exact_metrics(tp: int, fp: int, fn: int, tn: int) -> dict:
    """Metric formulas evaluated in exact rational arithmetic."""
    total = tp + fp + fn + tn
    if tp + fp + fn == 0:
        iou = precision = recall = f1 = Fraction(1)
    else:
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        iou = Fraction(tp, tp + fp + fn)
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else Fraction(0))
    accuracy = Fraction(tp + tn, total) if total else Fraction(1)
    return {"iou": iou, "f1": f1, "precision": precision, "recall": recall, "accuracy": accuracy}


def loop_confusion_counts(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int, int]:
    """Per-pixel Python-loop counting oracle."""
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def gradient_check_samples(model, x: torch.Tensor, y: torch.Tensor, kind,
                           per_tensor: int, seed: int, h: float = 1e-5) -> list[dict]:
    """Central finite differences against autograd for sampled parameters.

    Model and batch must be float64. Returns one record per sample with the
    analytic and FD gradients plus their relative error
    |a - f| / max(|a|, |f|, 1e-6).
    """
    def loss_value() -> torch.Tensor:
        return segmentation_loss(torch.sigmoid(model(x)), y, kind)

    model.zero_grad()
    loss_value().backward()
    rng = np.random.default_rng(seed)
    records = []
    for name, param in model.named_parameters():
        flat = param.detach().view(-1)
        grad = param.grad.detach().view(-1)
        idx = rng.choice(flat.numel(), size=min(per_tensor, flat.numel()), replace=False)
        for i in idx.tolist():
            orig = flat[i].item()
            with torch.no_grad():
                flat[i] = orig + h
                plus = loss_value().item()
                flat[i] = orig - h
                minus = loss_value().item()
                flat[i] = orig
            fd = (plus - minus) / (2.0 * h)
            analytic = grad[i].item()
            rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
            records.append({"name": name, "index": i, "analytic": analytic,
                            "fd": fd, "rel_error": rel})
    return records


def dir_digest(root) -> str:
    """SHA-256 over every file's relative path and bytes, in sorted order."""
    root = Path(root)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(b"\x00")
        digest.update(path.read_bytes())
        digest.update(b"\x01")
    return digest.hexdigest()


def random_binary_mask(rng: np.random.Generator, max_size: int = 64,
                       density: float | None = None) -> np.ndarray:
    h = int(rng.integers(1, max_size + 1))
    w = int(rng.integers(1, max_size + 1))
    if density is None:
        density = float(rng.uniform(0.05, 0.6))
    return (rng.random((h, w)) < density).astype(np.uint8)
