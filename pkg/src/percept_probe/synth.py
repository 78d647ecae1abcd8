"""Synthetic desk-scale corpus: textured objects under controlled conditions.

Every image is rendered analytically from (object, background, device,
orientation), so a seed fully determines the corpus.  Backgrounds differ
mainly in how much of the white backdrop is covered by smooth colored
regions; orientations are area-preserving affine poses of the object, which
move its edges without changing its colors; devices add color casts, blur
and sensor noise.

The mock recognizer scores each image against a latent severity built from
the same acquisition factors; it never looks at pixels.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .experiments import (BACKGROUNDS, DEFAULT_DEVICES, DEFAULT_REFERENCE_DEVICE,
                          ORIENTATIONS, Manifest, ManifestEntry)
from .imaging import Image, gaussian_blur_plane, quantize, write_png
from .recognition import PredictionRecord, write_predictions

CANVAS = 256

OBJECT_NAMES = (
    ("mug", "coffee mug", "cup"), ("toy car", "car"), ("stapler",), ("toothbrush",),
    ("football", "ball"), ("calculator",), ("sunglasses", "glasses"), ("hairbrush", "brush"),
    ("remote control", "remote"), ("water bottle", "bottle"), ("teddy bear", "toy"),
    ("scissors",), ("headphones",), ("wallet",), ("alarm clock", "clock"), ("tape",),
    ("notebook", "book"), ("hand sanitizer",), ("tennis racket", "racket"), ("flashlight",),
)
DISTRACTORS = (
    "indoors", "table", "wall", "furniture", "room", "product", "plastic", "pattern",
    "art", "floor", "home decor", "text", "design", "shelf", "box", "container",
    "electronics", "tool", "device", "fabric",
)

# fraction of backdrop covered by colored regions, and their palettes
BACKGROUND_STYLE = {
    "white": (0.0, ()),
    "kitchen_2d": (0.22, ((200, 60, 50), (235, 190, 60), (90, 140, 200))),
    "livingroom_2d": (0.42, ((120, 80, 50), (190, 150, 110), (70, 110, 70))),
    "office_3d": (0.64, ((60, 70, 90), (150, 150, 160), (40, 40, 45), (200, 180, 150))),
    "livingroom_3d": (0.86, ((90, 40, 30), (160, 110, 60), (50, 80, 60), (210, 200, 170))),
}

# (per-channel gain, blur sigma, noise sigma)
DEVICE_PROFILE = {
    "nikon_d80": ((1.0, 1.0, 1.0), 0.0, 1.0),
    "logitech_c920": ((1.0, 0.985, 1.02), 0.6, 2.5),
    "iphone_6s": ((1.035, 1.0, 0.965), 0.5, 3.5),
    "htc_one_a9": ((0.97, 1.0, 1.03), 0.9, 5.0),
    "lg_leon": ((1.03, 0.97, 0.97), 1.2, 7.0),
}


def _rot(deg):
    t = math.radians(deg)
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


# area-preserving poses (det = 1), applied as canvas = A @ object
POSES = {
    "front": np.eye(2),
    "left": _rot(25.0),
    "right": _rot(-25.0),
    "back": _rot(42.0) @ np.diag([-1.0, 1.0]),
    "top": _rot(90.0) @ np.diag([1.25, 0.8]),
}

# latent severity weights driving the mock recognizer
SEVERITY = {
    "background": {"white": 0.0, "kitchen_2d": 0.12, "livingroom_2d": 0.22,
                   "office_3d": 0.34, "livingroom_3d": 0.46},
    "orientation": {"front": 0.0, "left": 0.18, "right": 0.18, "back": 0.24, "top": 0.42},
    "device": {"nikon_d80": 0.0, "logitech_c920": 0.015, "iphone_6s": 0.03,
               "htc_one_a9": 0.045, "lg_leon": 0.06},
    "challenge_per_level": 0.07,
}

PLATFORMS = ("mock_a", "mock_b")


def _seed(*parts) -> int:
    blob = "\x00".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def _unit_hash(*parts) -> float:
    return _seed(*parts) / 2.0 ** 64


@dataclass(frozen=True)
class ObjectModel:
    object_id: str
    aliases: tuple
    colors: tuple  # three RGB triples: stripe A, stripe B, logo
    period: float
    half_w: float
    half_h: float


def make_objects(n, seed):
    rng = np.random.default_rng(_seed("objects", seed))
    objects = []
    for i in range(n):
        names = OBJECT_NAMES[i] if i < len(OBJECT_NAMES) else (f"object {i:03d}",)
        hues = rng.uniform(0, 1, 3)
        colors = tuple(tuple(int(c) for c in _hsv_rgb(h, rng.uniform(0.55, 0.95),
                                                      rng.uniform(0.45, 0.9)))
                       for h in hues)
        objects.append(ObjectModel(
            object_id=f"obj{i:03d}", aliases=names, colors=colors,
            period=float(rng.uniform(9.0, 16.0)),
            half_w=float(rng.uniform(44.0, 56.0)), half_h=float(rng.uniform(58.0, 70.0))))
    return objects


def _hsv_rgb(h, s, v):
    i = int(h * 6) % 6
    f = h * 6 - math.floor(h * 6)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    r, g, b = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return 255.0 * r, 255.0 * g, 255.0 * b


def render_background(name, seed, size=CANVAS):
    coverage, palette = BACKGROUND_STYLE[name]
    base = np.full((size, size, 3), 246.0)
    if coverage == 0.0:
        return base
    rng = np.random.default_rng(_seed("background", name, seed))
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), 14, mode="wrap")
    field /= field.std()
    thr = np.quantile(field, 1.0 - coverage)
    mask = 1.0 / (1.0 + np.exp(-(field - thr) / 0.6))
    # a second smooth field picks palette colors region by region
    pick = ndimage.gaussian_filter(rng.standard_normal((size, size)), 20, mode="wrap")
    pick = (pick - pick.min()) / (pick.max() - pick.min() + 1e-12) * (len(palette) - 1)
    pal = np.asarray(palette, dtype=np.float64)
    lo = np.floor(pick).astype(int)
    hi = np.minimum(lo + 1, len(palette) - 1)
    frac = (pick - lo)[..., None]
    color = pal[lo] * (1 - frac) + pal[hi] * frac
    return base * (1 - mask[..., None]) + color * mask[..., None]


def render_object(obj: ObjectModel, pose, offset, size=CANVAS):
    """Return (rgb, alpha) planes of the posed object on the canvas."""
    A_inv = np.linalg.inv(POSES[pose])
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    px = xx - c - offset[0]
    py = yy - c - offset[1]
    u = A_inv[0, 0] * px + A_inv[0, 1] * py
    v = A_inv[1, 0] * px + A_inv[1, 1] * py
    shape = (np.abs(u) / obj.half_w) ** 4 + (np.abs(v) / obj.half_h) ** 4
    alpha = np.clip((1.0 - shape) * 12.0, 0.0, 1.0)
    stripe = np.clip(0.5 + 1.5 * np.cos(2 * np.pi * u / obj.period), 0.0, 1.0)[..., None]
    ca, cb, cl = (np.asarray(col, dtype=np.float64) for col in obj.colors)
    rgb = ca * stripe + cb * (1 - stripe)
    logo = ((np.abs(u) < 0.35 * obj.half_w) & (v > -0.8 * obj.half_h)
            & (v < -0.4 * obj.half_h))
    rgb[logo] = cl
    return rgb, alpha


def apply_device(rgb, device, seed):
    gain, blur, noise = DEVICE_PROFILE[device]
    out = rgb * np.asarray(gain)
    if blur > 0:
        out = gaussian_blur_plane(out, blur)
    rng = np.random.default_rng(seed)
    out = out + rng.normal(0.0, noise, out.shape)
    return quantize(out)


def render_image(obj, background_rgb, background, device, orientation, corpus_seed):
    key = (corpus_seed, obj.object_id, background, device, orientation)
    jitter = np.random.default_rng(_seed("jitter", *key)).uniform(-4.0, 4.0, 2)
    if (background, device, orientation) == ("white", DEFAULT_REFERENCE_DEVICE, "front"):
        jitter = np.zeros(2)
    rgb, alpha = render_object(obj, orientation, jitter)
    comp = background_rgb * (1 - alpha[..., None]) + rgb * alpha[..., None]
    return Image(apply_device(comp, device, _seed("noise", *key)))


class MockRecognizer:
    """Pixel-blind recognizer whose hit rate falls as acquisition severity grows.

    An image is a top-5 hit when its latent severity (background + pose +
    device + challenge level, plus a small per-image jitter) is below the
    object's robustness.  Robustness values are spread evenly over the
    objects, so group accuracy decays smoothly with severity.
    """

    def __init__(self, platform, objects, seed):
        self.platform = platform
        self.seed = seed
        self.objects = {o.object_id: o for o in objects}
        n = len(objects)
        rng = np.random.default_rng(_seed("robustness", platform, seed))
        spread = 0.22 + 0.72 * (np.arange(n) + 0.5) / n
        offset = 0.0 if platform == PLATFORMS[0] else 0.05
        self.robustness = {o.object_id: float(r + offset)
                           for o, r in zip(objects, rng.permutation(spread))}

    def severity(self, entry: ManifestEntry) -> float:
        s = (SEVERITY["background"][entry.background]
             + SEVERITY["orientation"][entry.orientation]
             + SEVERITY["device"].get(entry.device, 0.0))
        if entry.challenge_kind is not None:
            s += SEVERITY["challenge_per_level"] * entry.challenge_level
        return s

    def is_hit(self, entry: ManifestEntry) -> bool:
        # jitter depends on the acquisition cell only, never on challenge level,
        # so raising the level can only turn hits into misses
        j = _unit_hash("hitjitter", self.platform, self.seed, entry.object_id,
                       entry.background, entry.device, entry.orientation)
        return self.severity(entry) + 0.08 * (j - 0.5) < self.robustness[entry.object_id]

    def predict(self, entry: ManifestEntry) -> PredictionRecord:
        rng = np.random.default_rng(_seed("labels", self.platform, self.seed, entry.image_id))
        obj = self.objects[entry.object_id]
        pool = [d for d in DISTRACTORS]
        for other in self.objects.values():
            if other.object_id != obj.object_id:
                pool.append(other.aliases[0])
        labels = [pool[i] for i in rng.permutation(len(pool))[:8]]
        truth = obj.aliases[int(rng.integers(len(obj.aliases)))]
        if rng.random() < 0.3:
            truth = truth.title()
        if self.is_hit(entry):
            labels.insert(int(rng.choice(5, p=[0.5, 0.2, 0.15, 0.1, 0.05])), truth)
        elif rng.random() < 0.5:
            labels.insert(int(rng.integers(5, 9)), truth)
        labels = list(dict.fromkeys(labels))[:10]
        conf = np.sort(rng.uniform(0.3, 0.99, len(labels)))[::-1]
        return PredictionRecord(entry.image_id, self.platform,
                                tuple((lab, round(float(c), 4)) for lab, c in zip(labels, conf)))


def synthesize(out_dir, seed=7, n_objects=10):
    """Render the full object x background x device x orientation grid.

    Writes ``images/*.png``, ``manifest.csv``, ``predictions/<platform>.jsonl``
    and a ready-to-use ``config.toml``; returns the ``Manifest``.
    """
    out = Path(out_dir)
    img_dir = out / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    objects = make_objects(n_objects, seed)
    backgrounds = {b: render_background(b, seed) for b in BACKGROUNDS}
    entries = []
    for obj in objects:
        for bg in BACKGROUNDS:
            for dev in DEFAULT_DEVICES:
                for orient in ORIENTATIONS:
                    image_id = f"{obj.object_id}_{bg}_{dev}_{orient}"
                    path = img_dir / f"{image_id}.png"
                    img = render_image(obj, backgrounds[bg], bg, dev, orient, seed)
                    write_png(img, path)
                    entries.append(ManifestEntry(image_id, path, obj.object_id, bg, dev,
                                                 orient, None, 0, obj.aliases))
    manifest = Manifest(entries)
    manifest.save(out / "manifest.csv")
    pred_dir = out / "predictions"
    pred_dir.mkdir(exist_ok=True)
    for platform in PLATFORMS:
        rec = MockRecognizer(platform, objects, seed)
        write_predictions(pred_dir / f"{platform}.jsonl", [rec.predict(e) for e in entries])
    (out / "objects.json").write_text(json.dumps(
        [{"object_id": o.object_id, "aliases": list(o.aliases)} for o in objects], indent=2) + "\n")
    (out / "config.toml").write_text(
        'manifest = "manifest.csv"\n'
        f"seed = {seed}\n\n"
        "[predictions]\n"
        + "".join(f'{p} = "predictions/{p}.jsonl"\n' for p in PLATFORMS))
    return manifest


def textured_fixture(size=224, seed=0):
    """Gray multi-scale texture used for degradation checks."""
    rng = np.random.default_rng(seed)
    acc = np.zeros((size, size))
    for sigma, weight in ((1.0, 0.6), (2.5, 0.9), (6.0, 1.2)):
        layer = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma, mode="wrap")
        acc += weight * layer / layer.std()
    acc = 128.0 + 40.0 * acc / acc.std()
    return Image(quantize(acc))
