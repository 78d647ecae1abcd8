"""The ten feature-space distance functions.

``L1``, ``L2`` and ``L2Squared`` compare unit-L2-normalized copies of the
inputs; ``SAD`` and ``SSAD`` are their template-matching counterparts on the
raw vectors.  All other kinds operate on raw vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, MethodMismatch, ValidationError, ZeroVectorCosine
from .features.base import FeatureVector

KINDS = ("L1", "L2", "L2Squared", "SAD", "SSAD", "Canberra", "Chebyshev",
         "Minkowski", "BrayCurtis", "Cosine")

TOKENS = {
    "l1": "L1", "l2": "L2", "l2sq": "L2Squared", "sad": "SAD", "ssad": "SSAD",
    "canberra": "Canberra", "chebyshev": "Chebyshev", "minkowski": "Minkowski",
    "braycurtis": "BrayCurtis", "cosine": "Cosine",
}
_KIND_TOKEN = {v: k for k, v in TOKENS.items()}

NORMALIZED_KINDS = frozenset({"L1", "L2", "L2Squared"})
DEFAULT_MINKOWSKI_P = 3.0


@dataclass(frozen=True)
class DistanceSpec:
    kind: str
    p: float = DEFAULT_MINKOWSKI_P

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown distance kind {self.kind!r}")
        if not (math.isfinite(self.p) and self.p > 0):
            raise ValidationError(f"Minkowski p must be finite and > 0, got {self.p}")

    @property
    def normalize_inputs(self) -> bool:
        return self.kind in NORMALIZED_KINDS

    @property
    def token(self) -> str:
        tok = _KIND_TOKEN[self.kind]
        if self.kind == "Minkowski":
            return f"{tok}:{self.p:g}"
        return tok

    @classmethod
    def parse(cls, token: str, default_p: float = DEFAULT_MINKOWSKI_P) -> "DistanceSpec":
        """Parse a CLI token such as ``l2``, ``cosine`` or ``minkowski:4``."""
        name, _, arg = token.strip().lower().partition(":")
        if name not in TOKENS:
            raise ValidationError(
                f"unknown metric {token!r}; choose from {', '.join(TOKENS)}")
        if arg and name != "minkowski":
            raise ValidationError(f"metric {name!r} takes no parameter")
        try:
            p = float(arg) if arg else default_p
        except ValueError:
            raise ValidationError(f"bad Minkowski exponent in {token!r}") from None
        return cls(TOKENS[name], p)


def _unit(x):
    # pre-scaling by the largest magnitude keeps tiny or huge vectors from
    # under/overflowing in the sum of squares
    peak = np.max(np.abs(x), axis=-1, keepdims=True)
    x = np.divide(x, peak, out=np.zeros_like(x), where=peak > 0)
    norm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)


def pairwise(a, b, spec: DistanceSpec):
    """Distances between broadcastable float arrays, reducing the last axis."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    kind = spec.kind
    if spec.normalize_inputs:
        a, b = _unit(a), _unit(b)
    if kind == "Cosine":
        if np.any(~np.any(a, axis=-1)) or np.any(~np.any(b, axis=-1)):
            raise ZeroVectorCosine("cosine distance is undefined for a zero vector")
        # 1 - cos(a, b) == |a/|a| - b/|b||^2 / 2, exact zero when a == b
        d = np.sum((_unit(a) - _unit(b)) ** 2, axis=-1) / 2.0
        return np.clip(d, 0.0, 2.0)
    diff = a - b
    if kind in ("L1", "SAD"):
        return np.sum(np.abs(diff), axis=-1)
    if kind == "L2":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if kind in ("L2Squared", "SSAD"):
        return np.sum(diff * diff, axis=-1)
    if kind == "Chebyshev":
        return np.max(np.abs(diff), axis=-1)
    if kind == "Minkowski":
        return np.sum(np.abs(diff) ** spec.p, axis=-1) ** (1.0 / spec.p)
    if kind == "Canberra":
        num = np.abs(diff)
        den = np.abs(a) + np.abs(b)
        return np.sum(np.divide(num, den, out=np.zeros_like(num), where=den > 0), axis=-1)
    if kind == "BrayCurtis":
        num = np.sum(np.abs(diff), axis=-1)
        den = np.sum(np.abs(a + b), axis=-1)
        return np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    raise AssertionError(kind)


def _check_pair(a: FeatureVector, b: FeatureVector):
    if a.method != b.method:
        raise MethodMismatch(f"cannot compare {a.method} with {b.method}")
    if a.dim != b.dim:
        raise DimMismatch(f"dimension mismatch: {a.dim} vs {b.dim}")


def distance(a, b, spec: DistanceSpec) -> float:
    """Distance between two FeatureVectors (or plain 1-D arrays)."""
    if isinstance(a, FeatureVector) and isinstance(b, FeatureVector):
        _check_pair(a, b)
        a, b = a.values, b.values
    else:
        a = np.asarray(a, dtype=np.float64).ravel()
        b = np.asarray(b, dtype=np.float64).ravel()
        if a.size != b.size:
            raise DimMismatch(f"dimension mismatch: {a.size} vs {b.size}")
    return float(pairwise(a, b, spec))


def distance_matrix(refs, queries, spec: DistanceSpec) -> np.ndarray:
    """Entry ``(i, j)`` is ``distance(refs[i], queries[j], spec)``."""
    refs, queries = list(refs), list(queries)
    vecs = refs + queries
    if vecs and all(isinstance(v, FeatureVector) for v in vecs):
        for v in vecs[1:]:
            _check_pair(vecs[0], v)
        R = np.stack([v.values for v in refs]) if refs else np.empty((0, vecs[0].dim))
        Q = np.stack([v.values for v in queries]) if queries else np.empty((0, vecs[0].dim))
    else:
        R = np.atleast_2d(np.asarray(refs, dtype=np.float64))
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if R.shape[1] != Q.shape[1]:
            raise DimMismatch(f"dimension mismatch: {R.shape[1]} vs {Q.shape[1]}")
    out = np.empty((R.shape[0], Q.shape[0]))
    for i in range(R.shape[0]):
        out[i] = pairwise(R[i][np.newaxis, :], Q, spec)
    return out
