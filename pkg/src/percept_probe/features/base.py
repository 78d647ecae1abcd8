from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

HANDCRAFTED = ("Color", "Daisy", "Edge", "Gabor", "HOG")
DATA_DRIVEN = ("VGG16", "VGG19")


def params_digest(method: str, params: dict) -> str:
    """Stable 16-hex-digit digest of an extractor's parameters."""
    blob = json.dumps({"method": method, "params": params}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    method: str
    params_digest: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.size == 0:
            raise ValidationError("feature vector must have positive dimension")
        if not np.all(np.isfinite(vals)):
            raise ValidationError(f"{self.method} feature contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def is_data_driven(self) -> bool:
        return self.method not in HANDCRAFTED

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.method == other.method
                and self.params_digest == other.params_digest
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"FeatureVector(method={self.method!r}, dim={self.dim})"
