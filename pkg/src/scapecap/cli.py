"""Command-line entry point.

Subcommands run one pipeline stage each and write their artifacts under
``paths.work_dir``; every run also writes ``runs/<subcommand>.json`` with
the config hash, seed, overrides and package versions.

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags,
missing upstream artifact, invalid config).  Failures print one line
``ERROR <ErrorClass>: message`` on stderr.
"""

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, vocab
from .config import (client_config, config_hash, feature_config, load_config, model_config,
                     train_config)
from .errors import ConfigError, MissingArtifact, ScapecapError, VocabularyError

logger = logging.getLogger("scapecap")

SUBCOMMANDS = ("extract-features", "pseudo-label", "split", "train", "predict", "caption", "score-captions",
               "analyze-correlations", "make-fixture")


class Workspace:
    """Artifact locations derived from the configuration."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.root = Path(cfg["paths"]["work_dir"])
        self.hash = config_hash(cfg)

    def __getattr__(self, name):
        layout = {
            "features": "features",
            "pseudo_manifest": "manifest.pseudo.csv",
            "vocabulary": "event_vocabulary.json",
            "split_manifest": "manifest.split.csv",
            "checkpoints": "checkpoints",
            "train_log": "train_log.jsonl",
            "history": "history.json",
            "curves": "training_curves.png",
            "predictions": "predictions.jsonl",
            "prompts": "prompts.jsonl",
            "captions": "captions.jsonl",
            "reports": "reports",
            "runs": "runs",
        }
        if name not in layout:
            raise AttributeError(name)
        return self.root / layout[name]

    def manifest_path(self):
        """Most processed manifest available: split > pseudo-labelled > input."""
        for p in (self.split_manifest, self.pseudo_manifest, Path(self.cfg["paths"]["manifest"])):
            if p.exists():
                return p
        raise MissingArtifact(f"manifest {self.cfg['paths']['manifest']} does not exist")

    def manifest(self):
        from .ingest import load_manifest

        return load_manifest(self.manifest_path())


def _require(path, what):
    if not Path(path).exists():
        raise MissingArtifact(f"{what} not found at {path}")
    return Path(path)


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------- subcommands

def cmd_extract_features(ws, args):
    from .features.cache import FeatureCache, extract_all

    manifest = ws.manifest()
    cache = FeatureCache(ws.features, feature_config(ws.cfg))
    computed, skipped = extract_all(manifest.records, cache, jobs=int(ws.cfg["jobs"]))
    logger.info("features: %d computed, %d already cached", computed, skipped)
    return {"computed": computed, "skipped": skipped, "feature_config_hash": cache.config_hash,
            "outputs": [str(ws.features)]}


def cmd_pseudo_label(ws, args):
    from dataclasses import replace

    from .ingest import (DatasetManifest, binarize_probs, clip_event_labels, load_class_names, load_manifest,
                         load_tagger_probs, rank_event_occurrences, select_target_events, write_manifest)

    paths, th = ws.cfg["paths"], ws.cfg["thresholds"]
    manifest = load_manifest(_require(paths["manifest"], "manifest"))
    class_names = load_class_names(_require(paths["class_names"], "tagger class list"))
    tagger_dir = _require(paths["tagger_dir"], "tagger output directory")

    per_second, clip_level = [], {}
    for rec in manifest.records:
        tp = load_tagger_probs(_require(tagger_dir / f"{rec.clip_id}.json", f"tagger output for {rec.clip_id}"),
                               rec.duration_s)
        rows = np.atleast_2d(tp.probs)
        per_second.append(binarize_probs(rows, th["tagger_segment"]))
        how = ws.cfg["pseudo_label"]["clip_aggregation"]
        if how not in ("mean", "max"):
            raise ConfigError("pseudo_label.clip_aggregation must be 'mean' or 'max'")
        clip_level[rec.clip_id] = rows.mean(axis=0) if how == "mean" else rows.max(axis=0)

    ranked = rank_event_occurrences(per_second, n_classes=len(class_names))
    chosen = select_target_events(ranked, ws.cfg["pseudo_label"]["masker_classes"], class_names)
    if sorted(chosen) != sorted(vocab.EVENTS):
        raise VocabularyError(f"tagger statistics select {chosen}, which is not the model's event vocabulary")
    records = [replace(r, event_multihot=tuple(int(b) for b in clip_event_labels(
        clip_level[r.clip_id], class_names, vocab.EVENTS, th["tagger_clip"]))) for r in manifest.records]
    ws.root.mkdir(parents=True, exist_ok=True)
    write_manifest(DatasetManifest(records, manifest.splits), ws.pseudo_manifest)
    ws.vocabulary.write_text(json.dumps({"config_hash": ws.hash, "events": list(vocab.EVENTS),
                                         "ranked_top": [[class_names[c], n] for c, n in ranked[:30]]}, indent=2))
    return {"outputs": [str(ws.pseudo_manifest), str(ws.vocabulary)]}


def cmd_split(ws, args):
    from .ingest import load_manifest, scaled_split_sizes, split_dataset, write_manifest

    src = ws.pseudo_manifest if ws.pseudo_manifest.exists() else _require(ws.cfg["paths"]["manifest"], "manifest")
    manifest = load_manifest(src)
    sizes = ws.cfg["split"]["sizes"] or scaled_split_sizes(len(manifest))
    out = split_dataset(manifest, sizes, ws.cfg["seed"])
    ws.root.mkdir(parents=True, exist_ok=True)
    write_manifest(out, ws.split_manifest)
    return {"sizes": list(sizes), "outputs": [str(ws.split_manifest)]}


def _split_data(ws, manifest, split):
    from .features.cache import FeatureCache
    from .train import load_split

    cache = FeatureCache(ws.features, feature_config(ws.cfg))
    records = manifest.records if split is None else manifest.subset(split)
    return load_split(records, cache)


def cmd_train(ws, args):
    from .model.network import init_params
    from .thumbs.report import plot_training_curves
    from .train import train

    manifest = ws.manifest()
    train_data = _split_data(ws, manifest, "train")
    val_data = _split_data(ws, manifest, "val")
    model = init_params(ws.cfg["seed"], model_config(ws.cfg))
    ws.root.mkdir(parents=True, exist_ok=True)
    model, history = train(model, train_data, val_data, train_config(ws.cfg), log_path=ws.train_log,
                           checkpoint_dir=ws.checkpoints, extra={"config_hash": ws.hash})
    hist = history.to_dict()
    hist["config_hash"] = ws.hash
    ws.history.write_text(json.dumps(hist, indent=2, sort_keys=True))
    plot_training_curves(hist, ws.curves)
    return {"best_epoch": history.best_epoch, "epochs": len(history.epochs), "stopped_early": history.stopped_early,
            "outputs": [str(ws.checkpoints / "best.pt"), str(ws.train_log), str(ws.history), str(ws.curves)]}


def cmd_predict(ws, args):
    from .model.network import load_checkpoint
    from .train import predict

    model, extra = load_checkpoint(_require(ws.checkpoints / "best.pt", "checkpoint"))
    manifest = ws.manifest()
    data = _split_data(ws, manifest, ws.cfg["analysis"]["split"])
    bundle = predict(model, data, int(ws.cfg["train"]["batch_size"]))
    rows = bundle.records(data.clip_ids)
    for row in rows:
        row["config_hash"] = ws.hash
    _write_jsonl(ws.predictions, rows)
    return {"n": len(rows), "checkpoint_config_hash": extra.get("config_hash"), "outputs": [str(ws.predictions)]}


def cmd_caption(ws, args):
    from .caption.client import StubTransport, generate_captions
    from .caption.prompt import load_template, prompt_from_prediction

    preds = _read_jsonl(_require(ws.predictions, "predictions"))
    c = ws.cfg["caption"]
    template = load_template(c["template"])
    prompts = [(p["clip_id"], prompt_from_prediction(p, template, ws.cfg["thresholds"]["caption_event"],
                                                     int(c["max_output_tokens"]))) for p in preds]
    _write_jsonl(ws.prompts, [{"clip_id": cid, "config_hash": ws.hash, "prompt_digest": p.digest, **p.to_dict()}
                              for cid, p in prompts])
    if c["provider"] == "stub":
        transport = StubTransport(c["stub_mode"])
    elif c["provider"] == "http":
        transport = None
    else:
        raise ConfigError("caption.provider must be 'http' or 'stub'")
    captions = generate_captions(prompts, client_config(ws.cfg), transport)
    rows = []
    for cap, (_, prompt) in zip(captions, prompts):
        row = cap.to_record(prompt)
        row["config_hash"] = ws.hash
        rows.append(row)
    _write_jsonl(ws.captions, rows)
    return {"n": len(rows), "outputs": [str(ws.prompts), str(ws.captions)]}


def cmd_score_captions(ws, args):
    from .errors import AllZeroDifferencesError, LengthError
    from .thumbs.report import write_score_report
    from .thumbs.scoring import aggregate, compare_sources, load_ratings

    captions = _read_jsonl(_require(ws.captions, "caption records"))
    stale = sorted({c.get("config_hash") for c in captions} - {ws.hash})
    if stale and not args.force:
        raise ConfigError(f"caption records were produced under config {stale}, current config is {ws.hash}; "
                          "rerun the caption stage or pass --force")
    ratings = load_ratings(_require(ws.cfg["paths"]["ratings"], "ratings file"))
    summary = aggregate(ratings)
    comparisons = []
    datasets = sorted({r.dataset for r in ratings})
    for dataset in datasets:
        for field in ("P", "R", "score"):
            try:
                comparisons.append(compare_sources(ratings, field, dataset,
                                                   ws.cfg["analysis"]["per_caption_mean"], ws.cfg["analysis"]["alpha"]))
            except (AllZeroDifferencesError, LengthError) as exc:
                logger.warning("no %s test for dataset %s: %s", field, dataset, exc)
    out = write_score_report(ratings, summary, comparisons, ws.reports)
    return {"n_ratings": len(ratings), "stale_hashes": stale, "outputs": [str(p) for p in out.values()]}


def cmd_analyze_correlations(ws, args):
    from .thumbs.report import write_correlation_report
    from .thumbs.stats import correlation_matrix

    preds = _read_jsonl(_require(ws.predictions, "predictions"))
    events = np.array([p["event_probs"] for p in preds])
    aq = np.array([p["aq"] for p in preds])
    matrix = correlation_matrix(events, aq, vocab.EVENTS, vocab.AQ_NAMES)
    out = write_correlation_report(matrix, ws.reports)
    return {"n": matrix.n, "n_undefined": int(matrix.undefined.sum()), "outputs": [str(p) for p in out.values()]}


def cmd_make_fixture(ws, args):
    from .fixtures import make_fixture

    target = Path(args.directory)
    paths = make_fixture(target, seed=ws.cfg["seed"])
    config = {
        "paths": {"manifest": "manifest.csv", "tagger_dir": "tagger", "class_names": "class_names.csv",
                  "ratings": "ratings.csv", "work_dir": "work"},
        "train": {"batch_size": 8, "max_epochs": 30, "learning_rate": 0.001},
        "caption": {"provider": "stub"},
    }
    (target / "config.yaml").write_text(yaml_dump(config))
    return {"outputs": [str(p) for p in paths.values()] + [str(target / "config.yaml")]}


def yaml_dump(data):
    import yaml

    return yaml.safe_dump(data, sort_keys=False)


HANDLERS = {
    "extract-features": cmd_extract_features,
    "pseudo-label": cmd_pseudo_label,
    "split": cmd_split,
    "train": cmd_train,
    "predict": cmd_predict,
    "caption": cmd_caption,
    "score-captions": cmd_score_captions,
    "analyze-correlations": cmd_analyze_correlations,
    "make-fixture": cmd_make_fixture,
}


# ---------------------------------------------------------------- entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--jobs", type=int, help="parallel workers for per-clip work")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a config value, e.g. train.max_epochs=5 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scapecap", description="Soundscape captioning pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "score-captions":
            p.add_argument("--force", action="store_true", help="accept captions made under another config")
        if name == "make-fixture":
            p.add_argument("directory", help="where to write the synthetic fixture")
    return parser


def _versions():
    import scipy
    import torch

    return {"scapecap": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "torch": torch.__version__}


def run(argv=None):
    """Parse ``argv`` and run one subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.override, args.seed, args.jobs)
        ws = Workspace(cfg)
        result = HANDLERS[args.command](ws, args)
    except ScapecapError as exc:
        print(f"ERROR {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - single-line report for any runtime failure
        logger.debug("unhandled error", exc_info=True)
        print(f"ERROR {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1

    meta = {"subcommand": args.command, "config_hash": ws.hash, "seed": cfg["seed"], "jobs": cfg["jobs"],
            "overrides": list(args.override), "config_file": args.config, "versions": _versions(), **result}
    run_dir = (Path(args.directory) / "work" if args.command == "make-fixture" else ws.root) / "runs"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / f"{args.command}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
