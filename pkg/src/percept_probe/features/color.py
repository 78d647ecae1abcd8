import numpy as np

from ..errors import GrayInput, ValidationError
from .base import FeatureVector, params_digest


def color_histogram(img, bins_per_channel=32):
    """Concatenated per-channel RGB histograms, each normalized to sum 1.

    Returns a ``FeatureVector`` of dimension ``3 * bins_per_channel``.
    """
    if img.channels != 3:
        raise GrayInput("color histogram needs an RGB image")
    if not 2 <= bins_per_channel <= 256:
        raise ValidationError("bins_per_channel must lie in [2, 256]")
    px = img.pixels.reshape(-1, 3).astype(np.int64)
    idx = px * bins_per_channel // 256
    n = px.shape[0]
    hists = [np.bincount(idx[:, c], minlength=bins_per_channel) / n for c in range(3)]
    return FeatureVector("Color", params_digest("Color", {"bins": bins_per_channel}),
                         np.concatenate(hists))
