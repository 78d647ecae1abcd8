import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from percept_probe.errors import ValidationError
from percept_probe.estimators import (HOG, AccuracyEstimator, ColorHistogram, Daisy,
                                      EdgeHistogram, GaborBank, ReferenceDistance, check_images)
from percept_probe.features import color_histogram
from percept_probe.imaging import Image, write_png


@pytest.fixture
def images(rng):
    return [Image(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)) for _ in range(3)]


@pytest.mark.parametrize("cls, dim", [(ColorHistogram, 96), (EdgeHistogram, 80),
                                      (GaborBank, 48), (HOG, 7 * 7 * 36), (Daisy, 200)])
def test_transformers(cls, dim, images):
    est = cls(preprocess=False)
    X = est.fit_transform(images)
    assert X.shape == (3, dim)
    assert est.n_features_out_ == dim
    assert clone(est).get_params() == est.get_params()


def test_transform_matches_function(images):
    X = ColorHistogram(bins_per_channel=8, preprocess=False).fit(images).transform(images)
    np.testing.assert_array_equal(X[1], color_histogram(images[1], 8).values)


def test_check_images(images, tmp_path):
    write_png(images[0], tmp_path / "a.png")
    out = check_images([tmp_path / "a.png", images[1].pixels, images[2]])
    assert out[0] == images[0] and out[1] == images[1]
    stacked = check_images(np.stack([im.pixels for im in images]))
    assert len(stacked) == 3
    for bad in (images[0], images[0].pixels, [], [images[0].pixels.astype(float)]):
        with pytest.raises(ValidationError):
            check_images(bad)


def test_not_fitted(images):
    with pytest.raises(NotFittedError):
        HOG().transform(images)


def test_pipeline_distance(images):
    pipe = make_pipeline(ColorHistogram(preprocess=False), ReferenceDistance(metric="canberra"))
    pipe.fit(images[:1])
    d = pipe.transform(images)
    assert d.shape == (3, 1)
    assert d[0, 0] == 0.0 and np.all(d[1:] > 0)
    assert pipe.set_params(referencedistance__metric="minkowski:4").get_params()[
        "referencedistance__metric"] == "minkowski:4"


def test_reference_distance_checks(rng):
    est = ReferenceDistance().fit(rng.random((2, 4)))
    with pytest.raises(ValueError):
        est.transform(rng.random((3, 5)))
    with pytest.raises(ValidationError):
        ReferenceDistance(metric="nope").fit(rng.random((2, 4)))


def test_accuracy_estimator():
    d = np.array([[0.1], [0.2], [0.3], [0.4], [0.5]])
    y = np.array([0.9, 0.8, 0.85, 0.4, 0.2])
    est = AccuracyEstimator().fit(d, y)
    pred = est.predict(d)
    assert np.all(np.diff(pred) <= 0)
    assert est.score(d, y) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        AccuracyEstimator().fit(d, y + 1)
