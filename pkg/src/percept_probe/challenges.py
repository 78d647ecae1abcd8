"""Simulated acquisition challenges at severity levels 0-5."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import BadLevel, ValidationError
from .imaging import Image, gaussian_blur_plane, quantize, resize_plane

KINDS = ("Underexposure", "Overexposure", "GaussianBlur", "Contrast",
         "DirtyLens", "SaltPepper", "Resize")
STOCHASTIC = frozenset({"DirtyLens", "SaltPepper"})
TOKENS = {k.lower(): k for k in KINDS}
TOKENS.update({"blur": "GaussianBlur", "gaussian_blur": "GaussianBlur",
               "salt_pepper": "SaltPepper", "dirty_lens": "DirtyLens"})

MAX_LEVEL = 5

# level 1..5 -> parameter; index 0 unused
SCHEDULE = {
    "Underexposure": {"gain": (0.8, 0.65, 0.5, 0.35, 0.2)},
    "Overexposure": {"gain": (1.2, 1.4, 1.6, 1.8, 2.0)},
    "GaussianBlur": {"sigma": (1.0, 2.0, 3.0, 4.0, 5.0)},
    "Contrast": {"alpha": (0.2, 0.35, 0.5, 0.65, 0.8),
                 "gamma": (1.1, 1.175, 1.25, 1.325, 1.4)},
    "DirtyLens": {"blobs": (1, 2, 3, 4, 5), "opacity": (0.3, 0.4, 0.5, 0.6, 0.7)},
    "SaltPepper": {"density": (0.05, 0.10, 0.15, 0.20, 0.25)},
    "Resize": {"factor": (1 / 1.5, 1 / 2, 1 / 3, 1 / 4, 1 / 5)},
}

LENS_DIRT_RGB = (70.0, 58.0, 45.0)


def parse_kind(token: str) -> str:
    try:
        return TOKENS[token.strip().lower()]
    except KeyError:
        raise ValidationError(f"unknown challenge {token!r}; choose from {', '.join(KINDS)}") from None


def derive_seed(image_id: str, kind: str, level: int) -> int:
    """Default seed for stochastic challenges: a hash of (image_id, kind, level)."""
    blob = f"{image_id}\x00{kind}\x00{level}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class ChallengeSpec:
    kind: str
    level: int
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown challenge kind {self.kind!r}")
        if not isinstance(self.level, (int, np.integer)) or not 0 <= self.level <= MAX_LEVEL:
            raise BadLevel(f"challenge level must be an integer in [0, {MAX_LEVEL}], got {self.level!r}")
        if self.kind in STOCHASTIC and self.seed is None:
            raise ValidationError(f"{self.kind} needs an explicit seed")

    @classmethod
    def for_image(cls, image_id, kind, level):
        seed = derive_seed(image_id, kind, level) if kind in STOCHASTIC else None
        return cls(kind, level, seed)


def challenge_schedule(kind: str, level: int) -> dict:
    """Parameter record for ``kind`` at ``level``; level 0 is the identity."""
    if kind not in KINDS:
        raise ValidationError(f"unknown challenge kind {kind!r}")
    if not isinstance(level, (int, np.integer)) or not 0 <= level <= MAX_LEVEL:
        raise BadLevel(f"challenge level must be in [0, {MAX_LEVEL}], got {level!r}")
    if level == 0:
        return {"identity": True}
    return {name: values[level - 1] for name, values in SCHEDULE[kind].items()}


def _blob_mask(h, w, blobs, rng):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    mask = np.zeros((h, w))
    short = min(h, w)
    for _ in range(blobs):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        radius = rng.uniform(0.06, 0.16) * short
        stretch = rng.uniform(0.6, 1.4)
        d2 = ((yy - cy) / radius) ** 2 + ((xx - cx) / (radius * stretch)) ** 2
        mask = np.maximum(mask, np.exp(-d2))
    return mask


def apply_challenge(img: Image, spec: ChallengeSpec) -> Image:
    if spec.level == 0:
        return img
    params = challenge_schedule(spec.kind, spec.level)
    x = img.pixels.astype(np.float64)
    kind = spec.kind
    if kind in ("Underexposure", "Overexposure"):
        out = x * params["gain"]
    elif kind == "GaussianBlur":
        # half-sample symmetric borders keep the mean intensity unchanged
        out = gaussian_blur_plane(x, params["sigma"], mode="reflect")
    elif kind == "Contrast":
        a = params["alpha"]
        blended = (1.0 - a) * x + a * 128.0
        out = 255.0 * (blended / 255.0) ** params["gamma"]
    elif kind == "DirtyLens":
        rng = np.random.default_rng(spec.seed)
        m = params["opacity"] * _blob_mask(img.height, img.width, params["blobs"], rng)
        if img.channels == 3:
            m = m[..., np.newaxis]
            dirt = np.asarray(LENS_DIRT_RGB)
        else:
            dirt = float(np.dot(LENS_DIRT_RGB, (0.299, 0.587, 0.114)))
        out = (1.0 - m) * x + m * dirt
    elif kind == "SaltPepper":
        rng = np.random.default_rng(spec.seed)
        hit = rng.random((img.height, img.width)) < params["density"]
        salt = rng.random((img.height, img.width)) < 0.5
        out = x.copy()
        out[hit & salt] = 255.0
        out[hit & ~salt] = 0.0
    elif kind == "Resize":
        f = params["factor"]
        small_w = max(1, int(np.floor(img.width * f + 0.5)))
        small_h = max(1, int(np.floor(img.height * f + 0.5)))
        small = quantize(resize_plane(x, small_w, small_h)).astype(np.float64)
        out = resize_plane(small, img.width, img.height)
    else:
        raise AssertionError(kind)
    return Image(quantize(out))
