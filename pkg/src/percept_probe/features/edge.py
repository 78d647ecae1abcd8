"""MPEG-7 style edge histogram descriptor."""
import math

import numpy as np

from ..errors import TooSmall, ValidationError
from ..imaging import to_grayscale
from .base import FeatureVector, params_digest

EDGE_TYPES = ("vertical", "horizontal", "diag45", "diag135", "nondirectional")

_R2 = math.sqrt(2.0)
# coefficients for the 2x2 sub-block means, ordered (top-left, top-right, bottom-left, bottom-right)
_FILTERS = np.array([
    [1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [_R2, 0.0, 0.0, -_R2],
    [0.0, _R2, -_R2, 0.0],
    [2.0, -2.0, -2.0, 2.0],
])


def _block_size(h, w, desired_blocks):
    side = math.floor(math.sqrt(h * w / desired_blocks) / 2) * 2
    return max(side, 2)


def edge_histogram(img, grid=4, threshold=11.0, desired_blocks=1100):
    """Five-bin edge-type histogram for each of ``grid x grid`` sub-images.

    Each sub-image is tiled by square image-blocks (MPEG-7 sizing, about
    ``desired_blocks`` blocks over the whole frame).  A block is split into
    2x2 sub-blocks; the filter with the largest absolute response on the
    sub-block means labels the block, provided that response exceeds
    ``threshold`` (gray levels).  Per sub-image histograms are normalized by
    the number of labelled blocks, or left all-zero when none fire.
    """
    if grid < 1:
        raise ValidationError("grid must be positive")
    gray = to_grayscale(img).pixels.astype(np.float64)
    h, w = gray.shape
    sub_h, sub_w = h // grid, w // grid
    bs = _block_size(h, w, desired_blocks)
    nby, nbx = sub_h // bs, sub_w // bs
    if nby == 0 or nbx == 0:
        raise TooSmall(f"{w}x{h} image too small for a {grid}x{grid} edge grid")
    half = bs // 2
    out = np.zeros((grid, grid, 5))
    for gy in range(grid):
        for gx in range(grid):
            region = gray[gy * sub_h:gy * sub_h + nby * bs, gx * sub_w:gx * sub_w + nbx * bs]
            # (nby, 2, half, nbx, 2, half) -> mean of each sub-block
            sub = region.reshape(nby, 2, half, nbx, 2, half).mean(axis=(2, 5))
            sub = sub.transpose(0, 2, 1, 3).reshape(nby * nbx, 4)
            resp = np.abs(sub @ _FILTERS.T)
            best = resp.argmax(axis=1)
            fired = resp.max(axis=1) > threshold
            counts = np.bincount(best[fired], minlength=5).astype(np.float64)
            total = counts.sum()
            if total > 0:
                out[gy, gx] = counts / total
    digest = params_digest("Edge", {"grid": grid, "threshold": threshold,
                                    "desired_blocks": desired_blocks})
    return FeatureVector("Edge", digest, out.reshape(-1))
