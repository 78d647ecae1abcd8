"""DAISY dense descriptor, mean-pooled over its sampling grid."""
import numpy as np

from ..errors import TooSmall, ValidationError
from ..imaging import gaussian_blur_plane, to_float_gray
from .base import FeatureVector, params_digest
from .hog import EPS, centered_gradients


def daisy_field(plane, radius=15, rings=3, histograms_per_ring=8,
                orientation_bins=8, step=16):
    """Raw (unnormalized) descriptors, shape ``(n_points, dim)``."""
    h, w = plane.shape
    gx, gy = centered_gradients(plane)
    gx, gy = gx / 2.0, gy / 2.0
    thetas = 2.0 * np.pi * np.arange(orientation_bins) / orientation_bins
    oriented = [np.maximum(0.0, np.cos(t) * gx + np.sin(t) * gy) for t in thetas]

    sigmas = [radius * (i + 1) / (2.0 * rings) for i in range(rings)]
    ring_radii = [radius * (i + 1) / float(rings) for i in range(rings)]
    # smoothed[i] has shape (orientation_bins, h, w) at sigma i
    smoothed = [np.stack([gaussian_blur_plane(g, s) for g in oriented]) for s in sigmas]

    ys = np.arange(radius, h - radius, step)
    xs = np.arange(radius, w - radius, step)
    if ys.size == 0 or xs.size == 0:
        raise TooSmall(f"{w}x{h} image leaves no DAISY sample points at radius {radius}")
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    cy, cx = cy.ravel(), cx.ravel()

    parts = [smoothed[0][:, cy, cx].T]
    angles = 2.0 * np.pi * np.arange(histograms_per_ring) / histograms_per_ring
    for i, r in enumerate(ring_radii):
        for a in angles:
            py = np.clip(np.rint(cy + r * np.sin(a)).astype(np.intp), 0, h - 1)
            px = np.clip(np.rint(cx + r * np.cos(a)).astype(np.intp), 0, w - 1)
            parts.append(smoothed[i][:, py, px].T)
    return np.concatenate(parts, axis=1)


def daisy_features(img, radius=15, rings=3, histograms_per_ring=8,
                   orientation_bins=8, step=16):
    if min(radius, rings, histograms_per_ring, orientation_bins, step) < 1:
        raise ValidationError("DAISY parameters must be positive")
    field = daisy_field(to_float_gray(img), radius, rings, histograms_per_ring,
                        orientation_bins, step)
    norms = np.sqrt(np.sum(field ** 2, axis=1, keepdims=True) + EPS ** 2)
    pooled = (field / norms).mean(axis=0)
    digest = params_digest("Daisy", {"radius": radius, "rings": rings,
                                     "histograms_per_ring": histograms_per_ring,
                                     "orientation_bins": orientation_bins, "step": step})
    return FeatureVector("Daisy", digest, pooled)
