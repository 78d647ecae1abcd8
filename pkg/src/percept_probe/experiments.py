"""Manifest handling, experiment groups, and per-group aggregates."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .challenges import KINDS as CHALLENGE_KINDS
from .challenges import parse_kind
from .distances import DistanceSpec, pairwise
from .errors import (EmptyManifest, MissingFeature, MissingPrediction, MissingReference,
                     ValidationError)
from .features.base import FeatureVector
from .recognition import ObjectLabelSet, top5_hit

BACKGROUNDS = ("white", "kitchen_2d", "livingroom_2d", "office_3d", "livingroom_3d")
ORIENTATIONS = ("front", "left", "right", "back", "top")
DEFAULT_DEVICES = ("nikon_d80", "logitech_c920", "iphone_6s", "htc_one_a9", "lg_leon")
DEFAULT_REFERENCE_DEVICE = "nikon_d80"

MANIFEST_HEADER = ("image_id", "path", "object_id", "background", "device", "orientation",
                   "challenge_kind", "challenge_level", "aliases")

BACKGROUND_VIEWS = ("front", "left", "right")
ORIENTATION_BACKGROUNDS = ("white", "livingroom_2d", "kitchen_2d")
ORIENTATION_CLASSES = {"front": "front", "top": "top", "left": "side", "right": "side",
                       "back": "side"}
ORIENTATION_CLASS_ORDER = ("front", "side", "top")

BACKGROUND = "background"
ORIENTATION = "orientation"
EXPERIMENTS = (BACKGROUND, ORIENTATION)


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: Path
    object_id: str
    background: str
    device: str
    orientation: str
    challenge_kind: str | None = None
    challenge_level: int = 0
    aliases: tuple = ()

    @property
    def challenge_free(self) -> bool:
        return self.challenge_kind is None or self.challenge_level == 0


@dataclass
class Manifest:
    entries: list
    devices: tuple = DEFAULT_DEVICES
    reference_device: str = DEFAULT_REFERENCE_DEVICE

    def __post_init__(self):
        self.devices = tuple(self.devices)
        if self.reference_device not in self.devices:
            raise ValidationError(f"reference device {self.reference_device!r} not among "
                                  f"devices {self.devices}")
        seen = set()
        for e in self.entries:
            if e.image_id in seen:
                raise ValidationError(f"duplicate image_id {e.image_id!r}")
            seen.add(e.image_id)
            if e.background not in BACKGROUNDS:
                raise ValidationError(f"{e.image_id}: unknown background {e.background!r}")
            if e.orientation not in ORIENTATIONS:
                raise ValidationError(f"{e.image_id}: unknown orientation {e.orientation!r}")
            if e.device not in self.devices:
                raise ValidationError(f"{e.image_id}: unknown device {e.device!r}")
            if e.challenge_kind is not None and e.challenge_kind not in CHALLENGE_KINDS:
                raise ValidationError(f"{e.image_id}: unknown challenge {e.challenge_kind!r}")
        self._by_id = {e.image_id: e for e in self.entries}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, image_id) -> ManifestEntry:
        return self._by_id[image_id]

    def __contains__(self, image_id):
        return image_id in self._by_id

    def object_of(self) -> dict:
        return {e.image_id: e.object_id for e in self.entries}

    def label_sets(self) -> dict:
        aliases = {}
        for e in self.entries:
            aliases.setdefault(e.object_id, set()).update(e.aliases)
        return {obj: ObjectLabelSet(obj, frozenset(a or {obj})) for obj, a in aliases.items()}

    @classmethod
    def load(cls, path, devices=DEFAULT_DEVICES, reference_device=DEFAULT_REFERENCE_DEVICE):
        path = Path(path)
        base = path.parent
        entries = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(MANIFEST_HEADER) - set(reader.fieldnames or ())
            if missing:
                raise ValidationError(f"{path}: manifest lacks columns {sorted(missing)}")
            for lineno, row in enumerate(reader, start=2):
                kind = (row["challenge_kind"] or "").strip()
                level_txt = (row["challenge_level"] or "").strip()
                try:
                    level = int(level_txt) if level_txt else 0
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: bad challenge_level {level_txt!r}") from None
                if kind.lower() in ("", "none"):
                    ckind = None
                else:
                    ckind = parse_kind(kind)
                img_path = Path(row["path"])
                if not img_path.is_absolute():
                    img_path = base / img_path
                aliases = tuple(a.strip() for a in (row["aliases"] or "").split("|") if a.strip())
                entries.append(ManifestEntry(row["image_id"], img_path, row["object_id"],
                                             row["background"], row["device"],
                                             row["orientation"], ckind, level, aliases))
        return cls(entries, devices, reference_device)

    def save(self, path, relative_to=None):
        relative_to = Path(relative_to or Path(path).parent)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            for e in self.entries:
                try:
                    p = Path(e.path).relative_to(relative_to)
                except ValueError:
                    p = Path(e.path)
                writer.writerow([e.image_id, p.as_posix(), e.object_id, e.background, e.device,
                                 e.orientation, e.challenge_kind or "none", e.challenge_level,
                                 "|".join(e.aliases)])


@dataclass(frozen=True, eq=False)
class ExperimentGroup:
    experiment: str
    key: tuple
    members: tuple
    objects: dict = field(default_factory=dict)  # member image id -> object id
    references: dict = field(default_factory=dict)  # object id -> reference image id

    def __post_init__(self):
        if not self.members:
            raise ValidationError(f"group {self.key} has no members")

    def reference_of(self, image_id) -> str:
        return self.references[self.objects[image_id]]

    @property
    def label(self) -> str:
        return "/".join(self.key)


def reference_image(manifest: Manifest, object_id: str) -> str:
    """The object's challenge-free white/front/reference-device shot."""
    matches = sorted(
        e.image_id for e in manifest.entries
        if e.object_id == object_id and e.challenge_free and e.orientation == "front"
        and e.background == "white" and e.device == manifest.reference_device)
    if not matches:
        raise MissingReference(object_id)
    return matches[0]


def _build(manifest, experiment, eligible, cell_of, cell_order):
    cells = {}
    for e in manifest.entries:
        if e.challenge_free and eligible(e):
            cells.setdefault(cell_of(e), []).append(e)
    if not cells:
        raise EmptyManifest(f"no manifest entries qualify for the {experiment} experiment")
    refs = {}
    groups = []
    for key in sorted(cells, key=cell_order):
        members = cells[key]
        objects = {e.image_id: e.object_id for e in members}
        for obj in objects.values():
            if obj not in refs:
                refs[obj] = reference_image(manifest, obj)
        group_refs = {obj: refs[obj] for obj in sorted(set(objects.values()))}
        groups.append(ExperimentGroup(experiment, key, tuple(e.image_id for e in members),
                                      objects, group_refs))
    return groups


def build_background_groups(manifest: Manifest, views=BACKGROUND_VIEWS) -> list:
    """One group per (device, background), front and side views only."""
    views = frozenset(views)
    dev_rank = {d: i for i, d in enumerate(manifest.devices)}
    return _build(
        manifest, BACKGROUND,
        lambda e: e.orientation in views,
        lambda e: (e.device, e.background),
        lambda k: (dev_rank[k[0]], BACKGROUNDS.index(k[1])))


def build_orientation_groups(manifest: Manifest, backgrounds=ORIENTATION_BACKGROUNDS,
                             classes=None) -> list:
    """One group per (device, orientation class) with classes front/side/top."""
    classes = dict(classes or ORIENTATION_CLASSES)
    backgrounds = frozenset(backgrounds)
    order = {c: i for i, c in enumerate(dict.fromkeys(
        list(ORIENTATION_CLASS_ORDER) + list(classes.values())))}
    dev_rank = {d: i for i, d in enumerate(manifest.devices)}
    return _build(
        manifest, ORIENTATION,
        lambda e: e.background in backgrounds and e.orientation in classes,
        lambda e: (e.device, classes[e.orientation]),
        lambda k: (dev_rank[k[0]], order[k[1]]))


def build_groups(manifest: Manifest, experiment: str) -> list:
    if experiment == BACKGROUND:
        return build_background_groups(manifest)
    if experiment == ORIENTATION:
        return build_orientation_groups(manifest)
    raise ValidationError(f"unknown experiment {experiment!r}")


def _feature(features, image_id):
    try:
        fv = features[image_id]
    except KeyError:
        raise MissingFeature(image_id) from None
    return fv.values if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=np.float64)


def member_distances(group: ExperimentGroup, features, spec: DistanceSpec) -> np.ndarray:
    """Distance of each member to its object's reference, in member order."""
    members = np.stack([_feature(features, m) for m in group.members])
    refs = np.stack([_feature(features, group.reference_of(m)) for m in group.members])
    if members.shape != refs.shape:
        raise ValidationError("member and reference features differ in dimension")
    return pairwise(members, refs, spec)


def group_mean_distance(group: ExperimentGroup, features, spec: DistanceSpec) -> float:
    """Mean member-to-reference distance; exactly-rounded so order never matters."""
    d = member_distances(group, features, spec)
    return math.fsum(d.tolist()) / len(d)


def group_accuracy(group: ExperimentGroup, predictions, truths) -> float:
    """Top-5 accuracy over the group's members.

    ``predictions`` maps image id to the platform's ``PredictionRecord``.
    """
    hits = 0
    for m in group.members:
        rec = predictions.get(m)
        if rec is None:
            raise MissingPrediction(m)
        hits += top5_hit(rec, truths[group.objects[m]])
    return hits / len(group.members)


@dataclass(frozen=True)
class GroupResult:
    key: tuple
    mean_distance: float
    mean_accuracy: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.mean_distance) and math.isfinite(self.mean_accuracy)):
            raise ValidationError(f"group {self.key}: non-finite aggregate")
        if self.count <= 0:
            raise ValidationError(f"group {self.key}: empty")
