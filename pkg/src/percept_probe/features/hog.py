"""Histogram of oriented gradients (Dalal-Triggs geometry)."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import GeometryMismatch, ValidationError
from ..imaging import to_float_gray
from .base import FeatureVector, params_digest

L2HYS_CLIP = 0.2
EPS = 1e-12


def centered_gradients(plane):
    """Centered differences with reflect-101 borders."""
    p = np.pad(plane, 1, mode="reflect")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def hog_cell_histograms(img, cell=8, bins=9):
    """Unnormalized orientation histograms, shape ``(cells_y, cells_x, bins)``.

    Orientation is unsigned (0-180 degrees) and bin ``b`` is centered on
    ``b * 180 / bins``; each pixel splits its gradient magnitude between the
    two nearest bin centers.
    """
    if cell < 1 or bins < 2:
        raise ValidationError("cell and bins must be positive (bins >= 2)")
    plane = to_float_gray(img)
    h, w = plane.shape
    if h % cell or w % cell:
        raise GeometryMismatch(f"cell size {cell} does not tile {w}x{h}")
    gx, gy = centered_gradients(plane)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    pos = ang / (np.pi / bins)
    lo_f = np.floor(pos)
    frac = pos - lo_f
    lo = lo_f.astype(np.intp) % bins
    hi = (lo + 1) % bins
    cy, cx = h // cell, w // cell
    cell_id = (np.arange(h)[:, None] // cell) * cx + (np.arange(w)[None, :] // cell)
    n = cy * cx * bins
    hist = np.bincount((cell_id * bins + lo).ravel(), (mag * (1 - frac)).ravel(), n)
    hist += np.bincount((cell_id * bins + hi).ravel(), (mag * frac).ravel(), n)
    return hist.reshape(cy, cx, bins)


def l2hys(blocks, clip=L2HYS_CLIP):
    """L2-Hys over the last axis; zero-energy blocks stay zero."""
    v = blocks / np.sqrt(np.sum(blocks ** 2, axis=-1, keepdims=True) + EPS ** 2)
    v = np.minimum(v, clip)
    return v / np.sqrt(np.sum(v ** 2, axis=-1, keepdims=True) + EPS ** 2)


def hog_features(img, cell=8, block=2, bins=9):
    """Block-normalized HOG descriptor with one-cell block stride."""
    if block < 1:
        raise ValidationError("block must be positive")
    cells = hog_cell_histograms(img, cell, bins)
    cy, cx, _ = cells.shape
    if cy < block or cx < block:
        raise GeometryMismatch(f"{cx}x{cy} cells cannot hold a {block}x{block} block")
    win = sliding_window_view(cells, (block, block), axis=(0, 1))
    # (by, bx, bins, block, block) -> (by, bx, block*block*bins)
    win = win.transpose(0, 1, 3, 4, 2).reshape(cy - block + 1, cx - block + 1, -1)
    desc = l2hys(win)
    digest = params_digest("HOG", {"cell": cell, "block": block, "bins": bins})
    return FeatureVector("HOG", digest, desc.reshape(-1))
