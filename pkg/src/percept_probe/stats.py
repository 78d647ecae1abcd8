"""Spearman rank correlation and scatter export."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConstantSeries, IoError, LengthMismatch, TooFew, ValidationError

MIN_GROUPS = 3


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size)
    i = 0
    n = x.size
    while i < n:
        j = i
        while j + 1 < n and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman's rho as the Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < MIN_GROUPS:
        raise TooFew(f"need at least {MIN_GROUPS} pairs, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("series must be finite")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ConstantSeries("rank correlation is undefined for a constant series")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@dataclass
class CorrelationReport:
    experiment: str
    platform: str
    feature: str
    metric: str
    rho: float
    rows: list = field(default_factory=list)  # [(group_key, mean_distance, mean_accuracy)]

    @property
    def abs_rho(self) -> float:
        return abs(self.rho)

    @property
    def n_groups(self) -> int:
        return len(self.rows)

    def summary(self) -> dict:
        return {"rho": self.rho, "abs_rho": self.abs_rho, "n": self.n_groups}


def correlate_experiment(groups, experiment="", platform="", feature="", metric="",
                         sign="distance") -> CorrelationReport:
    """Rank-correlate group mean distance against group mean accuracy.

    ``groups`` holds ``GroupResult`` objects.  With ``sign="distance"`` rho is
    signed as corr(distance, accuracy), so the expected relationship (larger
    distance, lower accuracy) is negative; ``sign="similarity"`` flips it.
    """
    if sign not in ("distance", "similarity"):
        raise ValidationError(f"unknown sign convention {sign!r}")
    groups = list(groups)
    if len(groups) < MIN_GROUPS:
        raise TooFew(f"need at least {MIN_GROUPS} groups, got {len(groups)}")
    dist = [g.mean_distance for g in groups]
    acc = [g.mean_accuracy for g in groups]
    rho = spearman(dist, acc)
    if sign == "similarity":
        rho = -rho
    rows = [(_key_str(g.key), g.mean_distance, g.mean_accuracy) for g in groups]
    return CorrelationReport(experiment, platform, feature, metric, rho, rows)


def _key_str(key):
    return key if isinstance(key, str) else "/".join(key)


def read_scatter_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(r["group_key"], float(r["mean_distance"]), float(r["mean_accuracy"]))
                for r in reader]


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _family(key: str) -> str:
    # keys are "<device>/<condition>"; markers group by condition
    return key.rsplit("/", 1)[-1]


def _svg(report: CorrelationReport) -> str:
    W, H, M = 480, 360, 56
    xs = [r[1] for r in report.rows]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1.0
    y0, y1 = 0.0, 1.0

    def px(x):
        return M + (x - x0) / (x1 - x0) * (W - 2 * M)

    def py(y):
        return H - M - (y - y0) / (y1 - y0) * (H - 2 * M)

    families = list(dict.fromkeys(_family(r[0]) for r in report.rows))
    style = "".join(
        f".f{i}{{fill:{_PALETTE[i % len(_PALETTE)]};}}" for i in range(len(families)))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f"<style>{style}</style>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{M}" y1="{H - M}" x2="{W - M}" y2="{H - M}" stroke="black"/>',
        f'<line x1="{M}" y1="{M}" x2="{M}" y2="{H - M}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 16}" text-anchor="middle">average feature distance</text>',
        f'<text x="16" y="{H / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {H / 2})">top-5 accuracy</text>',
        f'<text x="{W / 2}" y="20" text-anchor="middle">{escape(report.feature)} / '
        f'{escape(report.metric)} ({escape(report.experiment)}, {escape(report.platform)}): '
        f'rho={report.rho:.3f}</text>',
        f'<text x="{M}" y="{H - M + 14}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{W - M}" y="{H - M + 14}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{M - 6}" y="{H - M + 4}" text-anchor="end">0</text>',
        f'<text x="{M - 6}" y="{M + 4}" text-anchor="end">1</text>',
    ]
    for key, x, y in report.rows:
        cls = families.index(_family(key))
        out.append(f'<circle class="f{cls}" cx="{px(x):.2f}" cy="{py(y):.2f}" r="4">'
                   f"<title>{escape(key)}</title></circle>")
    for i, fam in enumerate(families):
        ly = M + 14 * i
        out.append(f'<circle class="f{i}" cx="{W - M + 8}" cy="{ly}" r="4"/>')
        out.append(f'<text x="{W - M + 16}" y="{ly + 4}">{escape(fam)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_export(report: CorrelationReport, path) -> tuple:
    """Write ``<path>.csv`` and ``<path>.svg``; returns both paths."""
    if report.n_groups < MIN_GROUPS:
        raise TooFew(f"refusing to export a scatter of {report.n_groups} groups")
    stem = Path(path)
    if stem.suffix in (".csv", ".svg"):
        stem = stem.with_suffix("")
    csv_path = stem.with_name(stem.name + ".csv")
    svg_path = stem.with_name(stem.name + ".svg")
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("group_key", "mean_distance", "mean_accuracy"))
            for key, d, a in report.rows:
                writer.writerow((key, repr(float(d)), repr(float(a))))
        svg_path.write_text(_svg(report), encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return csv_path, svg_path
