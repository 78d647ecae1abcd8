"""Corpus-level orchestration: feature extraction and correlation reports."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path

from .challenges import ChallengeSpec, apply_challenge
from .errors import ConstantSeries, MissingPrediction, PerceptProbeError, ValidationError
from .experiments import (EXPERIMENTS, GroupResult, Manifest, ManifestEntry, build_groups,
                          group_accuracy, member_distances)
from .features import METHOD_NAMES, EmbeddingStore, extract
from .features.base import HANDCRAFTED
from .features.embeddings import append_store, write_store
from .imaging import preprocess, read_image, write_png
from .stats import correlate_experiment, scatter_export

log = logging.getLogger(__name__)


class ExtractionError(PerceptProbeError):
    pass


def _extract_one(job):
    image_id, path, methods = job
    try:
        img = preprocess(read_image(path))
        return image_id, {m: extract(img, m, **params).values.astype("<f4")
                          for m, params in methods}
    except FileNotFoundError:
        raise ExtractionError(f"{image_id}: image file not found: {path}") from None
    except Exception as exc:
        raise ExtractionError(f"{image_id}: {type(exc).__name__}: {exc}") from None


def store_path(feature_dir, method):
    return Path(feature_dir) / f"{method.lower()}.emb"


def run_extract(manifest: Manifest, methods, feature_dir, workers=1, params=None):
    """Write one embedding store per method covering every manifest image.

    Images already present in an existing store are skipped, and a store
    with nothing to add is left untouched on disk.
    """
    params = params or {}
    feature_dir = Path(feature_dir)
    feature_dir.mkdir(parents=True, exist_ok=True)
    methods = [m.lower() for m in methods]
    for m in methods:
        if m not in METHOD_NAMES:
            raise ValidationError(f"unknown feature {m!r}; choose from {sorted(METHOD_NAMES)}")
    have = {}
    for m in methods:
        p = store_path(feature_dir, m)
        if p.exists():
            with EmbeddingStore(p) as st:
                have[m] = set(st.ids)
        else:
            have[m] = None
    jobs = []
    for e in manifest.entries:
        todo = tuple((m, tuple(sorted(params.get(m, {}).items()))) for m in methods
                     if have[m] is None or e.image_id not in have[m])
        if todo:
            jobs.append((e.image_id, str(e.path), tuple((m, dict(p)) for m, p in todo)))
    if not jobs:
        return {m: store_path(feature_dir, m) for m in methods}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, jobs, chunksize=4))
    else:
        results = [_extract_one(j) for j in jobs]
    for m in methods:
        records = [(i, vals[m]) for i, vals in results if m in vals]
        if not records:
            continue
        p = store_path(feature_dir, m)
        if have[m] is None:
            write_store(p, records, records[0][1].size)
        else:
            append_store(p, records)
    return {m: store_path(feature_dir, m) for m in methods}


def run_simulate(manifest: Manifest, kinds, levels, out_dir):
    """Write challenged copies of every challenge-free image.

    Returns a new ``Manifest`` holding the original rows plus one row per
    generated image; the input corpus is never modified.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    added = []
    for e in manifest.entries:
        if not e.challenge_free:
            continue
        img = read_image(e.path)
        for kind in kinds:
            for level in levels:
                spec = ChallengeSpec.for_image(e.image_id, kind, level)
                new_id = f"{e.image_id}__{kind}_{level}"
                path = img_dir / f"{new_id}.png"
                write_png(apply_challenge(img, spec), path)
                added.append(ManifestEntry(new_id, path, e.object_id, e.background, e.device,
                                           e.orientation, kind, level, e.aliases))
    return Manifest(list(manifest.entries) + added, manifest.devices, manifest.reference_device)


def _feature_matrix(store, ids):
    return {i: store.values(i) for i in ids}


def _cell_reports(experiment, groups, feature, vectors, metrics, accuracies):
    """All (platform, metric) reports for one experiment and feature."""
    out = []
    for spec in metrics:
        means = []
        for g in groups:
            d = member_distances(g, vectors, spec)
            means.append((g, math.fsum(d.tolist()) / len(d)))
        for platform, accs in accuracies.items():
            results = [GroupResult(g.key, m, accs[g.key], len(g.members)) for g, m in means]
            try:
                rep = correlate_experiment(results, experiment, platform, feature, spec.token)
            except ConstantSeries:
                log.warning("constant series for %s/%s/%s/%s", experiment, platform,
                            feature, spec.token)
                rep = None
            out.append((platform, spec.token, rep, results))
    return out


def run_evaluate(manifest: Manifest, stores: dict, metrics, predictions: dict,
                 experiments=EXPERIMENTS, workers=1):
    """Cross product of experiment x platform x feature x metric.

    ``stores`` maps feature name to an open ``EmbeddingStore``;
    ``predictions`` maps platform to ``{image_id: PredictionRecord}``.
    Returns ``(report, reports)`` where ``report`` is the nested JSON-ready
    dict and ``reports`` lists every ``CorrelationReport`` produced.
    """
    truths = manifest.label_sets()
    report = {}
    all_reports = []
    for experiment in experiments:
        groups = build_groups(manifest, experiment)
        accuracies = {}
        for platform in sorted(predictions):
            try:
                accuracies[platform] = {g.key: group_accuracy(g, predictions[platform], truths)
                                        for g in groups}
            except MissingPrediction as exc:
                log.warning("platform %s skipped for %s: %s", platform, experiment, exc)
        needed = sorted({m for g in groups for m in g.members}
                        | {r for g in groups for r in g.references.values()})

        def job(feature):
            vectors = _feature_matrix(stores[feature], needed)
            return feature, _cell_reports(experiment, groups, feature, vectors, metrics,
                                          accuracies)

        features = sorted(stores)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(job, features))
        else:
            results = [job(f) for f in features]
        exp_out = report.setdefault(experiment, {})
        for feature, cells in results:
            for platform, metric, rep, _ in cells:
                cell = exp_out.setdefault(platform, {}).setdefault(feature, {})
                if rep is None:
                    cell[metric] = {"rho": None, "abs_rho": None, "n": len(groups)}
                else:
                    cell[metric] = rep.summary()
                    all_reports.append(rep)
    return report, all_reports


def best_cells(reports, data_driven=None):
    """Best report per (experiment, platform), optionally per feature family."""
    best = {}
    for rep in reports:
        if data_driven is not None and (rep.feature not in HANDCRAFTED) != data_driven:
            continue
        k = (rep.experiment, rep.platform)
        cur = best.get(k)
        if cur is None or (rep.abs_rho, rep.feature, rep.metric) > (cur.abs_rho, cur.feature,
                                                                    cur.metric):
            best[k] = rep
    return best


def summary_table(report, features, metrics):
    """Rows of a features x (experiment:platform:metric) abs-rho table."""
    columns = []
    for exp in report:
        for platform in sorted(report[exp]):
            for metric in metrics:
                columns.append((exp, platform, metric))
    rows = []
    for feature in features:
        row = [feature]
        for exp, platform, metric in columns:
            cell = report.get(exp, {}).get(platform, {}).get(feature, {}).get(metric)
            v = None if cell is None else cell["abs_rho"]
            row.append("" if v is None else f"{v:.4f}")
        rows.append(row)
    header = ["feature"] + [f"{e}:{p}:{m}" for e, p, m in columns]
    return header, rows


def write_outputs(out_dir, report, reports, features, metrics):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    header, rows = summary_table(report, features, metrics)
    lines = [",".join(header)] + [",".join(r) for r in rows]
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = {r[0]: dict(zip(header[1:], r[1:])) for r in rows}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
    written = []
    for flag in (False, True):
        for (exp, platform), rep in sorted(best_cells(reports, data_driven=flag).items()):
            name = f"{exp}_{platform}_{rep.feature}_{rep.metric.replace(':', '-')}"
            written.extend(scatter_export(rep, out_dir / "scatter" / name))
    return written
