"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import itertools
import json
import math
import shutil
import time

import numpy as np
import pytest

from conftest import record_criterion
from percept_probe.challenges import ChallengeSpec, apply_challenge
from percept_probe.cli import main
from percept_probe.distances import KINDS, DistanceSpec, distance, pairwise
from percept_probe.experiments import (BACKGROUNDS, DEFAULT_DEVICES, ORIENTATIONS, Manifest,
                                       ManifestEntry, build_background_groups,
                                       build_orientation_groups)
from percept_probe.features import (color_histogram, daisy_features, edge_histogram,
                                    hog_features)
from percept_probe.imaging import Image
from percept_probe.recognition import top5_accuracy
from percept_probe.stats import spearman
from percept_probe.synth import PLATFORMS, MockRecognizer, make_objects, textured_fixture

SEED = 7
N_OBJECTS = 10
RUNTIME_LIMIT = 300.0


@pytest.fixture(scope="session")
def run(tmp_path_factory):
    """Synthesize, extract and evaluate single-threaded, timing the whole run."""
    root = tmp_path_factory.mktemp("acceptance")
    corpus = root / "corpus"
    out = root / "run1"
    t0 = time.perf_counter()
    assert main(["synthesize", "--out", str(corpus), "--seed", str(SEED),
                 "--objects", str(N_OBJECTS)]) == 0
    common = ["--config", str(corpus / "config.toml"), "--out", str(out), "--workers", "1"]
    assert main(["extract"] + common) == 0
    assert main(["evaluate"] + common) == 0
    elapsed = time.perf_counter() - t0
    report = json.loads((out / "report.json").read_text())
    return {"root": root, "corpus": corpus, "out": out, "elapsed": elapsed, "report": report}


def best(report, experiment, platform, feature=None):
    cells = report[experiment][platform]
    return max((c["abs_rho"], f, m) for f, row in cells.items() for m, c in row.items()
               if feature is None or f == feature)


def test_criterion_1_metric_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    n, dim = 10_000, 8
    a = rng.standard_normal((n, dim))
    b = rng.standard_normal((n, dim))
    c = rng.standard_normal((n, dim))
    failures = []
    for kind in KINDS:
        spec = DistanceSpec(kind)
        ab, ba = pairwise(a, b, spec), pairwise(b, a, spec)
        if np.any(ab < 0):
            failures.append(f"{kind}: negative")
        if np.any(np.abs(ab - ba) > 1e-12 * np.maximum(np.abs(ab), 1e-300)):
            failures.append(f"{kind}: asymmetric")
        if np.any(pairwise(a, a, spec) != 0.0) or np.any(ab <= 0):
            failures.append(f"{kind}: identity of indiscernibles")
    for kind in ("L1", "L2", "Chebyshev", "Minkowski"):
        spec = DistanceSpec(kind)
        slack = pairwise(a, b, spec) + pairwise(b, c, spec) - pairwise(a, c, spec)
        if slack.min() < -1e-9:
            failures.append(f"{kind}: triangle slack {slack.min():.3g}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10.0
    record_criterion(1, ok, f"{n} pairs x {len(KINDS)} kinds in {elapsed:.2f}s; "
                            f"{failures or 'no violations'}")
    assert ok, failures


def test_criterion_2_hand_fixtures():
    a, b = (1.0, 2.0, 3.0), (4.0, 6.0, 8.0)
    expected = {
        "SAD": 12.0, "Chebyshev": 5.0, "Minkowski": 6.0,
        "Canberra": 1.5545454545454545,  # 3/5 + 4/8 + 5/11
        "BrayCurtis": 0.5,
        "Cosine": 0.007416666029069652,  # 1 - 40 / (sqrt(14) sqrt(116))
    }
    got = {k: distance(a, b, DistanceSpec(k)) for k in expected}
    bad = {k: got[k] for k in expected if abs(got[k] - expected[k]) > 1e-9 * abs(expected[k])}
    record_criterion(2, not bad, f"{len(expected)} fixtures; mismatches {bad or 'none'}")
    assert not bad


def _oracle_ranks(x):
    n = len(x)
    ties = [[i for i in range(n) if x[i] == v] for v in sorted(set(x))]
    total, count = [0.0] * n, 0
    for orders in itertools.product(*(itertools.permutations(t) for t in ties)):
        for rank, i in enumerate((i for g in orders for i in g), start=1):
            total[i] += rank
        count += 1
    return [t / count for t in total]


def _pearson(p, q):
    mp, mq = sum(p) / len(p), sum(q) / len(q)
    cov = math.fsum((u - mp) * (v - mq) for u, v in zip(p, q))
    return cov / math.sqrt(math.fsum((u - mp) ** 2 for u in p) *
                           math.fsum((v - mq) ** 2 for v in q))


def test_criterion_3_spearman_oracle():
    rng = np.random.default_rng(303)
    worst, trials = 0.0, 0
    while trials < 1000:
        n = int(rng.integers(3, 9))
        x = [int(v) for v in rng.integers(0, 5, n)]
        y = [int(v) for v in rng.integers(0, 5, n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        trials += 1
        worst = max(worst, abs(spearman(x, y) - _pearson(_oracle_ranks(x), _oracle_ranks(y))))
    fixture = spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    ok = worst <= 1e-9 and fixture == 0.8
    record_criterion(3, ok, f"{trials} tied integer vectors, max |diff| {worst:.2e}; "
                            f"fixture rho = {fixture!r}")
    assert ok


def test_criterion_4_feature_fixtures():
    problems = []
    for value in (0, 77, 255):
        img = Image(np.full((224, 224, 3), value, np.uint8))
        if np.any(hog_features(img).values) or np.any(daisy_features(img).values):
            problems.append(f"constant {value}: non-zero HOG/Daisy")
        col = color_histogram(img).values.reshape(3, -1)
        if not np.array_equal(np.count_nonzero(col, axis=1), [1, 1, 1]):
            problems.append(f"constant {value}: color not single-bin")
    rng = np.random.default_rng(404)
    samples = [Image(rng.integers(0, 256, (224, 224, 3), dtype=np.uint8)),
               Image(np.dstack([textured_fixture(224, seed=s).pixels for s in range(3)])),
               Image(np.full((224, 224, 3), 40, np.uint8))]
    for img in samples:
        blocks = [color_histogram(img).values.reshape(3, -1),
                  edge_histogram(img).values.reshape(-1, 5)]
        for blk in blocks:
            s = blk.sum(axis=1)
            if not np.all((np.abs(s - 1.0) <= 1e-9) | np.all(blk == 0.0, axis=1)):
                problems.append("histogram block neither unit-sum nor zero")
    dim = hog_features(samples[0]).dim
    if dim != 26244:
        problems.append(f"HOG dim {dim}")
    record_criterion(4, not problems, f"HOG dim {dim}; {problems or 'all fixtures hold'}")
    assert not problems


def test_criterion_5_group_arithmetic(run):
    m = Manifest.load(run["corpus"] / "manifest.csv")
    bg, ori = build_background_groups(m), build_orientation_groups(m)
    bg_eligible = {e.image_id for e in m if e.orientation in ("front", "left", "right")}
    ori_eligible = {e.image_id for e in m
                    if e.background in ("white", "livingroom_2d", "kitchen_2d")}
    partition = True
    for groups, eligible in ((bg, bg_eligible), (ori, ori_eligible)):
        members = [i for g in groups for i in g.members]
        partition &= len(members) == len(set(members)) and set(members) == eligible
    ok = len(bg) == 25 and len(ori) == 15 and partition
    record_criterion(5, ok, f"{len(m)} images -> {len(bg)} background / {len(ori)} "
                            f"orientation groups; partition {'holds' if partition else 'broken'}")
    assert ok


def test_criterion_6_synthetic_analog(run):
    report = run["report"]
    lines, ok = [], run["elapsed"] < RUNTIME_LIMIT
    for platform in PLATFORMS:
        for experiment, bar in (("background", 0.90), ("orientation", 0.75)):
            rho, feat, metric = best(report, experiment, platform)
            ok &= rho >= bar
            lines.append(f"{experiment}/{platform} {feat}/{metric} {rho:.3f} (>= {bar})")
    record_criterion(6, ok, f"{'; '.join(lines)}; runtime {run['elapsed']:.0f}s "
                            f"(< {RUNTIME_LIMIT:.0f}s)")
    assert ok


def test_criterion_7_qualitative_ordering(run):
    report = run["report"]
    lines, ok = [], True
    for platform in PLATFORMS:
        color_bg = best(report, "background", platform, "Color")[0]
        edge_bg = best(report, "background", platform, "Edge")[0]
        color_or = best(report, "orientation", platform, "Color")[0]
        edge_or = best(report, "orientation", platform, "Edge")[0]
        ok &= color_bg > edge_bg and edge_or > color_or
        lines.append(f"{platform}: background Color {color_bg:.3f} vs Edge {edge_bg:.3f}, "
                     f"orientation Edge {edge_or:.3f} vs Color {color_or:.3f}")
    record_criterion(7, ok, "; ".join(lines))
    assert ok


def test_criterion_8_determinism(run):
    outputs = []
    for name, workers in (("run_w8", 8), ("run_w1", 1)):
        out = run["root"] / name
        shutil.copytree(run["out"] / "features", out / "features")
        assert main(["evaluate", "--config", str(run["corpus"] / "config.toml"),
                     "--out", str(out), "--workers", str(workers)]) == 0
        outputs.append((out / "report.json").read_bytes())
    first = (run["out"] / "report.json").read_bytes()
    ok = all(o == first for o in outputs)
    record_criterion(8, ok, f"report.json identical across workers 1, 8, 1 "
                            f"({len(first)} bytes)" if ok else "report.json differs")
    assert ok


def test_criterion_9_degradation_monotonicity():
    img = textured_fixture()
    spec = DistanceSpec("L2")
    ref = hog_features(img)
    dists = [distance(ref, hog_features(apply_challenge(img, ChallengeSpec("GaussianBlur", k))),
                      spec) for k in range(1, 6)]
    increasing = all(a < b for a, b in zip(dists, dists[1:]))

    objects = make_objects(N_OBJECTS, SEED)
    base = [ManifestEntry(f"{o.object_id}_{b}_{d}_{r}", None, o.object_id, b, d, r,
                          aliases=o.aliases)
            for o in objects for b in BACKGROUNDS for d in DEFAULT_DEVICES for r in ORIENTATIONS]
    m = Manifest(base)
    truths, ids = m.label_sets(), m.object_of()
    acc_lines, monotone = [], True
    for platform in PLATFORMS:
        rec = MockRecognizer(platform, objects, SEED)
        accs = []
        for level in range(1, 6):
            recs = [rec.predict(ManifestEntry(e.image_id, None, e.object_id, e.background,
                                              e.device, e.orientation, "GaussianBlur", level,
                                              e.aliases)) for e in base]
            accs.append(top5_accuracy(recs, truths, ids))
        monotone &= all(a >= b for a, b in zip(accs, accs[1:]))
        acc_lines.append(f"{platform} accuracy {[round(a, 3) for a in accs]}")
    ok = increasing and monotone
    record_criterion(9, ok, f"HOG-L2 {[round(d, 4) for d in dists]}; " + "; ".join(acc_lines))
    assert ok
