"""Platform predictions, top-5 scoring, and prediction ingestion."""
from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (AuthRejected, EmptySet, EndpointUnreachable, InvariantViolation,
                     ParseError, UnknownObject, ValidationError)

log = logging.getLogger(__name__)

TOP_K = 5


def fold(label: str) -> str:
    return label.strip().lower()


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    platform: str
    labels: tuple  # ((label, confidence), ...) sorted by confidence, descending

    def __post_init__(self):
        labels = tuple((str(lab), float(conf)) for lab, conf in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValidationError(f"{self.image_id}: labels must be non-empty")
        names = [lab for lab, _ in labels]
        if len(set(names)) != len(names):
            raise ValidationError(f"{self.image_id}: duplicate labels")
        confs = [c for _, c in labels]
        if any(not 0.0 <= c <= 1.0 for c in confs):
            raise ValidationError(f"{self.image_id}: confidence outside [0, 1]")
        if any(b > a for a, b in zip(confs, confs[1:])):
            raise ValidationError(f"{self.image_id}: confidences must be non-increasing")

    @classmethod
    def from_json(cls, obj) -> "PredictionRecord":
        """Build from a decoded JSONL object, re-sorting labels by confidence."""
        labels = [(item["label"], item["confidence"]) for item in obj["labels"]]
        labels.sort(key=lambda lc: -float(lc[1]))
        return cls(str(obj["image_id"]), str(obj["platform"]), tuple(labels))

    def to_json(self) -> dict:
        return {"image_id": self.image_id, "platform": self.platform,
                "labels": [{"label": lab, "confidence": conf} for lab, conf in self.labels]}


@dataclass(frozen=True)
class ObjectLabelSet:
    object_id: str
    aliases: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        folded = frozenset(fold(a) for a in self.aliases if fold(a))
        if not folded:
            raise ValidationError(f"object {self.object_id!r} needs at least one alias")
        object.__setattr__(self, "aliases", folded)


def top5_hit(rec: PredictionRecord, truth: ObjectLabelSet) -> bool:
    return any(fold(label) in truth.aliases for label, _ in rec.labels[:TOP_K])


def top5_accuracy(recs, truths, ids) -> float:
    """Fraction of records whose object's alias appears in the top five.

    ``truths`` maps object id to ``ObjectLabelSet``; ``ids`` maps image id to
    object id.
    """
    recs = list(recs)
    if not recs:
        raise EmptySet("no prediction records to score")
    hits = 0
    for rec in recs:
        obj = ids.get(rec.image_id)
        if obj is None or obj not in truths:
            raise UnknownObject(f"image {rec.image_id!r} maps to no known object")
        hits += top5_hit(rec, truths[obj])
    return hits / len(recs)


def _parse_lines(lines, source):
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"{source}: {exc.msg}") from None
        try:
            records.append(PredictionRecord.from_json(obj))
        except (KeyError, TypeError) as exc:
            raise ParseError(lineno, f"{source}: missing or malformed field {exc}") from None
        except ValidationError as exc:
            raise InvariantViolation(lineno, f"{source}: {exc}") from None
    return records


def load_predictions(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return _parse_lines(fh, path)


def write_predictions(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class EndpointDescriptor:
    """A REST recognizer; ``url_template`` holds an ``{image}`` slot for the id.

    The image bytes are POSTed as the request body.  The response must be a
    JSON object with a ``labels`` list of ``{label, confidence}`` items.
    """

    url_template: str
    platform: str = "remote"
    auth_header: str | None = None
    auth_value_env: str | None = None
    max_in_flight: int = 4
    timeout_ms: int = 30000

    def __post_init__(self):
        if "{image}" not in self.url_template:
            raise ValidationError("url_template needs an {image} slot")
        if self.max_in_flight < 1 or self.timeout_ms <= 0:
            raise ValidationError("max_in_flight and timeout_ms must be positive")

    @classmethod
    def from_config(cls, cfg: dict) -> "EndpointDescriptor":
        known = {"url_template", "platform", "auth_header", "auth_value_env",
                 "max_in_flight", "timeout_ms"}
        unknown = set(cfg) - known
        if unknown:
            raise ValidationError(f"unknown endpoint keys: {sorted(unknown)}")
        return cls(**cfg)

    def headers(self) -> dict:
        if not self.auth_header:
            return {}
        value = os.environ.get(self.auth_value_env or "", "")
        return {self.auth_header: value}


def fetch_predictions(client: EndpointDescriptor, images, cache,
                      session: requests.Session | None = None) -> list:
    """Cache-first prediction fetch.

    ``images`` is a list of ``(image_id, path)``.  Images already present in
    the JSONL ``cache`` (for this platform) are not requested again; fresh
    responses are appended to it through a single locked writer.  Failures
    for individual images are logged and skipped.
    """
    cache = Path(cache)
    cached = {}
    if cache.exists():
        for rec in load_predictions(cache):
            if rec.platform == client.platform:
                cached[rec.image_id] = rec
    todo = [(i, p) for i, p in images if i not in cached]
    fresh = {}
    failures = []
    auth_failures = []
    lock = threading.Lock()
    session = session or requests.Session()
    headers = client.headers()

    def fetch_one(item):
        image_id, path = item
        url = client.url_template.format(image=image_id)
        try:
            body = Path(path).read_bytes()
            resp = session.post(url, data=body, headers=headers,
                                timeout=client.timeout_ms / 1000.0)
        except (OSError, requests.RequestException) as exc:
            log.warning("fetch failed for %s: %s", image_id, exc)
            with lock:
                failures.append(image_id)
            return
        if resp.status_code in (401, 403):
            with lock:
                auth_failures.append(image_id)
            return
        try:
            resp.raise_for_status()
            payload = resp.json()
            rec = PredictionRecord.from_json({"image_id": image_id, "platform": client.platform,
                                              "labels": payload["labels"]})
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            log.warning("bad response for %s: %s", image_id, exc)
            with lock:
                failures.append(image_id)
            return
        with lock:
            fresh[image_id] = rec
            with open(cache, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")

    if todo:
        with ThreadPoolExecutor(max_workers=client.max_in_flight) as pool:
            list(pool.map(fetch_one, todo))
    if auth_failures:
        raise AuthRejected(f"{client.platform}: credentials rejected for "
                           f"{len(auth_failures)} of {len(todo)} requests")
    if todo and not fresh:
        raise EndpointUnreachable(f"{client.platform}: all {len(todo)} requests failed")
    out = []
    for image_id, _ in images:
        rec = cached.get(image_id) or fresh.get(image_id)
        if rec is not None:
            out.append(rec)
    return out
