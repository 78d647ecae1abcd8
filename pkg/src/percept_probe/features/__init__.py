"""Handcrafted feature extractors and the embedding store."""
from ..errors import ValidationError
from .base import DATA_DRIVEN, HANDCRAFTED, FeatureVector, params_digest
from .color import color_histogram
from .daisy import daisy_features
from .edge import edge_histogram
from .embeddings import EmbeddingStore, load_embedding, method_from_path, write_store
from .gabor import gabor_features
from .hog import hog_cell_histograms, hog_features

EXTRACTORS = {
    "color": color_histogram,
    "daisy": daisy_features,
    "edge": edge_histogram,
    "gabor": gabor_features,
    "hog": hog_features,
}

# token -> method tag
METHOD_NAMES = {"color": "Color", "daisy": "Daisy", "edge": "Edge",
                "gabor": "Gabor", "hog": "HOG"}


def extract(img, method, **params):
    """Run the extractor registered under ``method`` (lowercase token)."""
    try:
        fn = EXTRACTORS[method.lower()]
    except KeyError:
        raise ValidationError(
            f"unknown feature {method!r}; choose from {sorted(EXTRACTORS)}") from None
    return fn(img, **params)


__all__ = [
    "DATA_DRIVEN", "EXTRACTORS", "HANDCRAFTED", "METHOD_NAMES", "EmbeddingStore",
    "FeatureVector", "color_histogram", "daisy_features", "edge_histogram", "extract",
    "gabor_features", "hog_cell_histograms", "hog_features", "load_embedding",
    "method_from_path", "params_digest", "write_store",
]
