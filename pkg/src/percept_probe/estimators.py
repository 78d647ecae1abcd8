"""scikit-learn compatible wrappers.

Feature extractors are stateless transformers from a list of images to an
``(n_samples, n_features)`` matrix; ``ReferenceDistance`` turns feature rows
into distances to fitted reference rows; ``AccuracyEstimator`` maps a mean
feature distance to an expected top-5 accuracy.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.isotonic import IsotonicRegression
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .distances import DistanceSpec, distance_matrix
from .errors import ValidationError
from .features import (color_histogram, daisy_features, edge_histogram, gabor_features,
                       hog_features)
from .imaging import Image, preprocess, read_image
from .stats import spearman


def check_images(X) -> list:
    """Coerce ``X`` to a list of ``Image``.

    Accepts a sequence of ``Image`` objects, uint8 arrays shaped ``(H, W)``
    or ``(H, W, 3)``, or file paths; a stacked uint8 array of shape
    ``(n, H, W)`` or ``(n, H, W, 3)`` also works.  A 3-D array whose last
    axis has length 3 is read as one RGB image and rejected.
    """
    single_array = isinstance(X, np.ndarray) and (
        X.ndim < 3 or (X.ndim == 3 and X.shape[-1] == 3))
    if isinstance(X, (Image, str, Path)) or single_array:
        raise ValidationError("expected a sequence of images, got a single image")
    out = []
    for item in X:
        if isinstance(item, Image):
            out.append(item)
        elif isinstance(item, (str, Path)):
            out.append(read_image(item))
        else:
            arr = np.asarray(item)
            if arr.dtype != np.uint8:
                raise ValidationError(f"image arrays must be uint8, got {arr.dtype}")
            out.append(Image(arr))
    if not out:
        raise ValidationError("X contains no images")
    return out


class _FeatureTransformer(TransformerMixin, BaseEstimator):
    _extractor = None

    def _params(self):
        params = self.get_params()
        params.pop("preprocess")
        return params

    def _one(self, img):
        if self.preprocess:
            img = preprocess(img)
        return type(self)._extractor(img, **self._params())

    def fit(self, X, y=None):
        first = self._one(check_images(X)[0])
        self.method_ = first.method
        self.params_digest_ = first.params_digest
        self.n_features_out_ = first.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        return np.stack([self._one(img).values for img in check_images(X)])


class ColorHistogram(_FeatureTransformer):
    _extractor = staticmethod(color_histogram)

    def __init__(self, bins_per_channel=32, preprocess=True):
        self.bins_per_channel = bins_per_channel
        self.preprocess = preprocess


class EdgeHistogram(_FeatureTransformer):
    _extractor = staticmethod(edge_histogram)

    def __init__(self, grid=4, threshold=11.0, desired_blocks=1100, preprocess=True):
        self.grid = grid
        self.threshold = threshold
        self.desired_blocks = desired_blocks
        self.preprocess = preprocess


class GaborBank(_FeatureTransformer):
    _extractor = staticmethod(gabor_features)

    def __init__(self, scales=4, orientations=6, preprocess=True):
        self.scales = scales
        self.orientations = orientations
        self.preprocess = preprocess


class HOG(_FeatureTransformer):
    _extractor = staticmethod(hog_features)

    def __init__(self, cell=8, block=2, bins=9, preprocess=True):
        self.cell = cell
        self.block = block
        self.bins = bins
        self.preprocess = preprocess


class Daisy(_FeatureTransformer):
    _extractor = staticmethod(daisy_features)

    def __init__(self, radius=15, rings=3, histograms_per_ring=8, orientation_bins=8,
                 step=16, preprocess=True):
        self.radius = radius
        self.rings = rings
        self.histograms_per_ring = histograms_per_ring
        self.orientation_bins = orientation_bins
        self.step = step
        self.preprocess = preprocess


class ReferenceDistance(TransformerMixin, BaseEstimator):
    """Distances from each sample to each fitted reference row.

    ``transform`` returns shape ``(n_samples, n_references)``.
    """

    def __init__(self, metric="l2", minkowski_p=3.0):
        self.metric = metric
        self.minkowski_p = minkowski_p

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.spec_ = DistanceSpec.parse(self.metric, self.minkowski_p)
        self.references_ = X
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "references_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return distance_matrix(self.references_, X, self.spec_).T


class AccuracyEstimator(RegressorMixin, BaseEstimator):
    """Monotone map from mean feature distance to expected top-5 accuracy.

    Fitting is isotonic regression, non-increasing in distance by default.
    ``score`` reports the Spearman rho between the model's implied ordering
    (larger distance, lower accuracy) and the observed accuracies.
    """

    def __init__(self, increasing=False):
        self.increasing = increasing

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[1] != 1:
            raise ValueError("AccuracyEstimator expects a single distance column")
        if np.any((y < 0) | (y > 1)):
            raise ValueError("accuracies must lie in [0, 1]")
        self.isotonic_ = IsotonicRegression(increasing=self.increasing, y_min=0.0, y_max=1.0,
                                            out_of_bounds="clip").fit(X[:, 0], y)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "isotonic_")
        X = check_array(X, dtype=np.float64)
        return self.isotonic_.predict(X[:, 0])

    def score(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        d = X[:, 0]
        return spearman(d if self.increasing else -d, y)
