"""``percept-probe`` command line.

Every option may come from a TOML config file (``--config``); command-line
flags override it.  Relative paths in the config resolve against the config
file's directory.  Exit codes: 0 success, 1 validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .challenges import parse_kind
from .distances import TOKENS as METRIC_TOKENS
from .distances import DEFAULT_MINKOWSKI_P, DistanceSpec
from .errors import PerceptProbeError, ValidationError
from .experiments import (DEFAULT_DEVICES, DEFAULT_REFERENCE_DEVICE, EXPERIMENTS, Manifest)
from .features import METHOD_NAMES, EmbeddingStore
from .features.embeddings import method_from_path
from .pipeline import run_evaluate, run_extract, run_simulate, store_path, write_outputs
from .recognition import EndpointDescriptor, fetch_predictions, load_predictions

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("percept_probe")

DEFAULT_FEATURES = ("color", "daisy", "edge", "gabor", "hog")


def _csv(value):
    return [v.strip() for v in value.split(",") if v.strip()]


class RunConfig:
    """Merged view of config file and flags."""

    def __init__(self, args):
        self.base = Path.cwd()
        data = {}
        if args.config:
            cfg_path = Path(args.config)
            try:
                data = tomllib.loads(cfg_path.read_text(encoding="utf-8"))
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise ValidationError(f"cannot read config {cfg_path}: {exc}") from None
            self.base = cfg_path.resolve().parent
        self.data = data
        self.args = args

    def _path(self, value):
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def get(self, name, default=None):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        return self.data.get(name, default)

    def path(self, name, required=False):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return Path(flag)
        value = self._path(self.data.get(name))
        if required and value is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")
        return value

    def list(self, name, default):
        value = self.get(name)
        if value is None:
            return list(default)
        return _csv(value) if isinstance(value, str) else list(value)

    @property
    def out(self) -> Path:
        return self.path("out") or Path("out")

    @property
    def workers(self) -> int:
        w = int(self.get("workers", os.cpu_count() or 1))
        if w < 1:
            raise ValidationError("--workers must be >= 1")
        return w

    @property
    def seed(self) -> int:
        return int(self.get("seed", 7))

    def manifest(self) -> Manifest:
        path = self.path("manifest", required=True)
        if not path.exists():
            raise ValidationError(f"manifest not found: {path}")
        devices = self.data.get("devices", {})
        return Manifest.load(path, devices.get("names", DEFAULT_DEVICES),
                             devices.get("reference", DEFAULT_REFERENCE_DEVICE))

    def features(self):
        feats = [f.lower() for f in self.list("features", DEFAULT_FEATURES)]
        if not feats:
            raise ValidationError("select at least one feature")
        return feats

    def metrics(self):
        p = float(self.get("minkowski_p", DEFAULT_MINKOWSKI_P))
        specs = [DistanceSpec.parse(t, p) for t in self.list("metrics", METRIC_TOKENS)]
        if not specs:
            raise ValidationError("select at least one metric")
        return specs

    def experiments(self):
        exps = [e.lower() for e in self.list("experiments", EXPERIMENTS)]
        for e in exps:
            if e not in EXPERIMENTS:
                raise ValidationError(f"unknown experiment {e!r}")
        return exps

    def feature_params(self, method):
        return dict(self.data.get("feature_params", {}).get(method, {}))

    def embeddings(self) -> dict:
        out = {}
        for name, p in self.data.get("embeddings", {}).items():
            out[name] = self._path(p)
        for item in getattr(self.args, "embedding", None) or []:
            name, _, p = item.partition("=")
            if not p:
                p, name = name, method_from_path(name)
            out[name] = Path(p)
        return out

    def predictions(self) -> dict:
        out = {name: self._path(p) for name, p in self.data.get("predictions", {}).items()}
        for item in getattr(self.args, "predictions", None) or []:
            name, _, p = item.partition("=")
            if not p:
                raise ValidationError(f"--predictions expects PLATFORM=PATH, got {item!r}")
            out[name] = Path(p)
        return out


def _common_flags(on_subcommand):
    """Flags accepted both before and after the subcommand name.

    Subcommand copies default to SUPPRESS so they never mask a value given
    before the subcommand.
    """
    kw = {"default": argparse.SUPPRESS} if on_subcommand else {}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="TOML run configuration", **kw)
    p.add_argument("-v", "--verbose", action="store_true", **kw)
    p.add_argument("--manifest", help="manifest CSV", **kw)
    p.add_argument("--features", help=f"comma list from {','.join(METHOD_NAMES)}", **kw)
    p.add_argument("--metrics", help=f"comma list from {','.join(METRIC_TOKENS)}", **kw)
    p.add_argument("--minkowski-p", dest="minkowski_p", type=float, **kw)
    p.add_argument("--experiments", help="background,orientation", **kw)
    p.add_argument("--platforms", help="comma list of platforms to keep", **kw)
    p.add_argument("--out", help="output directory", **kw)
    p.add_argument("--workers", type=int, **kw)
    p.add_argument("--seed", type=int, **kw)
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="percept-probe", description=__doc__.splitlines()[0],
                                     parents=[_common_flags(False)])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags(True)

    p = sub.add_parser("synthesize", parents=[common],
                       help="render a synthetic corpus with mock predictions")
    p.add_argument("--objects", type=int, default=None)

    p = sub.add_parser("simulate", parents=[common], help="write challenged copies of a corpus")
    p.add_argument("--challenges", help="comma list of challenge kinds")
    p.add_argument("--levels", help="comma list of levels 1-5")

    sub.add_parser("extract", parents=[common], help="compute feature stores")

    p = sub.add_parser("fetch", parents=[common], help="query a REST recognizer, cache-first")
    p.add_argument("--endpoint", help="url template with an {image} slot")
    p.add_argument("--platform")

    p = sub.add_parser("evaluate", parents=[common],
                       help="correlate group distances with accuracy")
    p.add_argument("--predictions", action="append", metavar="PLATFORM=PATH")
    p.add_argument("--embedding", action="append", metavar="[NAME=]PATH",
                   help="precomputed embedding store (e.g. VGG16=vgg16.emb)")

    p = sub.add_parser("report", parents=[common], help="print the summary table of an evaluation")
    p.add_argument("--signed", action="store_true", help="print signed rho")
    return parser


def cmd_synthesize(cfg: RunConfig):
    from .synth import synthesize

    n = cfg.args.objects or cfg.data.get("synthesize", {}).get("objects", 10)
    if n < 1:
        raise ValidationError("--objects must be positive")
    manifest = synthesize(cfg.out, seed=cfg.seed, n_objects=int(n))
    print(f"wrote {len(manifest)} images to {cfg.out}")


def cmd_simulate(cfg: RunConfig):
    manifest = cfg.manifest()
    sim = cfg.data.get("simulate", {})
    kinds = [parse_kind(k) for k in
             (_csv(cfg.args.challenges) if cfg.args.challenges else sim.get("challenges", []))]
    levels_raw = _csv(cfg.args.levels) if cfg.args.levels else sim.get("levels", [1, 2, 3, 4, 5])
    try:
        levels = [int(v) for v in levels_raw]
    except ValueError:
        raise ValidationError(f"bad levels {levels_raw!r}") from None
    if not kinds:
        raise ValidationError("select at least one challenge with --challenges")
    if any(not 1 <= lv <= 5 for lv in levels):
        raise ValidationError("levels must lie in 1..5")
    out = cfg.out
    result = run_simulate(manifest, kinds, levels, out)
    result.save(out / "manifest.csv")
    print(f"wrote {len(result) - len(manifest)} challenged images; manifest at {out / 'manifest.csv'}")


def cmd_extract(cfg: RunConfig):
    manifest = cfg.manifest()
    feats = cfg.features()
    params = {f: cfg.feature_params(f) for f in feats}
    paths = run_extract(manifest, feats, cfg.out / "features", cfg.workers, params)
    for m, p in paths.items():
        print(f"{m}: {p}")


def cmd_fetch(cfg: RunConfig):
    manifest = cfg.manifest()
    ep = dict(cfg.data.get("endpoint", {}))
    if cfg.args.endpoint:
        ep["url_template"] = cfg.args.endpoint
    if cfg.args.platform:
        ep["platform"] = cfg.args.platform
    if "url_template" not in ep:
        raise ValidationError("no endpoint configured; use --endpoint or an [endpoint] table")
    client = EndpointDescriptor.from_config(ep)
    cache = cfg.out / "predictions" / f"{client.platform}.jsonl"
    cache.parent.mkdir(parents=True, exist_ok=True)
    recs = fetch_predictions(client, [(e.image_id, e.path) for e in manifest], cache)
    print(f"{len(recs)} predictions for {client.platform} in {cache}")


def _open_stores(cfg: RunConfig, feats):
    stores = {}
    feature_dir = cfg.out / "features"
    for f in feats:
        p = store_path(feature_dir, f)
        if not p.exists():
            raise ValidationError(f"no feature store for {f!r} at {p}; run extract first")
        st = EmbeddingStore(p)
        stores[st.method] = st
    for name, p in cfg.embeddings().items():
        if not p.exists():
            raise ValidationError(f"embedding store not found: {p}")
        stores[name] = EmbeddingStore(p, method=name)
    return stores


def cmd_evaluate(cfg: RunConfig):
    manifest = cfg.manifest()
    feats = cfg.features()
    metrics = cfg.metrics()
    experiments = cfg.experiments()
    pred_paths = cfg.predictions()
    keep = cfg.get("platforms")
    if keep:
        keep = set(_csv(keep) if isinstance(keep, str) else keep)
        pred_paths = {k: v for k, v in pred_paths.items() if k in keep}
    predictions = {}
    for platform, path in sorted(pred_paths.items()):
        if not path.exists():
            log.warning("predictions for %s missing at %s; platform skipped", platform, path)
            continue
        predictions[platform] = {r.image_id: r for r in load_predictions(path)
                                 if r.platform == platform}
    if not predictions:
        raise ValidationError("no prediction sources available")
    stores = _open_stores(cfg, feats)
    try:
        report, reports = run_evaluate(manifest, stores, metrics, predictions, experiments,
                                       cfg.workers)
        written = write_outputs(cfg.out, report, reports, sorted(stores),
                                [m.token for m in metrics])
    finally:
        for st in stores.values():
            st.close()
    print(f"report: {cfg.out / 'report.json'} ({len(reports)} cells, {len(written)} scatter files)")


def cmd_report(cfg: RunConfig):
    path = cfg.out / "report.json"
    if not path.exists():
        raise ValidationError(f"no report at {path}; run evaluate first")
    report = json.loads(path.read_text(encoding="utf-8"))
    key = "rho" if cfg.args.signed else "abs_rho"
    for exp in report:
        for platform in sorted(report[exp]):
            cells = report[exp][platform]
            metrics = list(dict.fromkeys(m for f in cells.values() for m in f))
            print(f"== {exp} / {platform} ({key}) ==")
            print("feature".ljust(10) + "".join(m.rjust(12) for m in metrics))
            for feature in sorted(cells):
                row = feature.ljust(10)
                for m in metrics:
                    v = cells[feature].get(m, {}).get(key)
                    row += ("-" if v is None else f"{v:.3f}").rjust(12)
                print(row)


COMMANDS = {
    "synthesize": cmd_synthesize, "simulate": cmd_simulate, "extract": cmd_extract,
    "fetch": cmd_fetch, "evaluate": cmd_evaluate, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(args)
        COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PerceptProbeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
