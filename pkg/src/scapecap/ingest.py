"""Dataset manifests, train/val/test splitting and tagger pseudo-labels.

Manifest files are CSV (or JSON Lines) with one row per clip::

    clip_id,audio_path,scene,e1..e15,aq1..aq8,split[,duration_s][,sample_rate]

``aq1..aq8`` follow :data:`scapecap.vocab.AQ_NAMES` and ``e1..e15`` follow
the manifest's event vocabulary (by default :data:`scapecap.vocab.EVENTS`).
``audio_path`` is resolved relative to the manifest's directory.
"""

import csv
import os
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import vocab
from .errors import (
    MissingAudioError,
    ParseError,
    SizeError,
    ValidationError,
    VocabularyError,
)

logger = logging.getLogger(__name__)

MIN_DURATION_S = 2.80
SPLITS = ("train", "val", "test")
# Split sizes used for the full corpus; smaller corpora are scaled to these proportions.
REFERENCE_SPLIT_SIZES = (19152, 2520, 3576)
N_TAGGER_CLASSES = 527

EVENT_COLUMNS = tuple(f"e{i + 1}" for i in range(vocab.N_EVENTS))
AQ_COLUMNS = tuple(f"aq{i + 1}" for i in range(vocab.N_AQ))
MANIFEST_COLUMNS = ("clip_id", "audio_path", "scene") + EVENT_COLUMNS + AQ_COLUMNS + ("split",)
OPTIONAL_COLUMNS = ("duration_s", "sample_rate")


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    audio_path: Path
    duration_s: float
    scene: str
    aq_responses: tuple
    event_multihot: tuple
    sample_rate: int | None = None

    @property
    def scene_index(self):
        return vocab.SCENE_INDEX[self.scene]

    def validate(self):
        if self.scene not in vocab.SCENE_INDEX:
            raise ValidationError(f"unknown scene {self.scene!r}, expected one of {vocab.SCENES}", self.clip_id)
        if len(self.aq_responses) != vocab.N_AQ:
            raise ValidationError(f"expected {vocab.N_AQ} AQ responses, got {len(self.aq_responses)}", self.clip_id)
        for name, value in zip(vocab.AQ_NAMES, self.aq_responses):
            if value not in (1, 2, 3, 4, 5):
                raise ValidationError(f"AQ {name}={value} outside {{1..5}}", self.clip_id)
        if len(self.event_multihot) != vocab.N_EVENTS or any(b not in (0, 1) for b in self.event_multihot):
            raise ValidationError("event labels must be 15 bits", self.clip_id)
        if not self.duration_s >= MIN_DURATION_S:
            raise ValidationError(
                f"duration {self.duration_s:.3f} s is below the model minimum of {MIN_DURATION_S} s",
                self.clip_id,
            )


@dataclass
class DatasetManifest:
    records: list
    splits: list = None
    event_vocabulary: tuple = vocab.EVENTS
    source: Path | None = None

    def __post_init__(self):
        if self.splits is None:
            self.splits = [""] * len(self.records)
        if len(self.splits) != len(self.records):
            raise ValueError("one split tag per record is required")
        seen = set()
        for rec in self.records:
            if rec.clip_id in seen:
                raise ValidationError("duplicate clip_id", rec.clip_id)
            seen.add(rec.clip_id)
        if len(self.event_vocabulary) != vocab.N_EVENTS:
            raise VocabularyError(f"event vocabulary must have {vocab.N_EVENTS} names")

    def __len__(self):
        return len(self.records)

    def subset(self, split):
        return [r for r, s in zip(self.records, self.splits) if s == split]

    def split_of(self, clip_id):
        for rec, tag in zip(self.records, self.splits):
            if rec.clip_id == clip_id:
                return tag
        raise KeyError(clip_id)

    def by_id(self):
        return {r.clip_id: r for r in self.records}


def _audio_info(path):
    """Duration (s) and sample rate of a WAV file without decoding it."""
    from scipy.io import wavfile

    sr, data = wavfile.read(path, mmap=True)
    return data.shape[0] / sr, int(sr)


def _parse_row(row, base_dir, check_audio):
    clip_id = (row.get("clip_id") or "").strip()
    if not clip_id:
        raise ParseError("row without clip_id")
    missing = [c for c in MANIFEST_COLUMNS if c not in row or row[c] is None]
    if missing:
        raise ParseError(f"missing columns {missing}", clip_id)
    try:
        events = tuple(int(float(row[c])) for c in EVENT_COLUMNS)
        aq = tuple(int(float(row[c])) if float(row[c]).is_integer() else float(row[c]) for c in AQ_COLUMNS)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric label: {exc}", clip_id) from None

    audio_path = Path(str(row["audio_path"]).strip())
    if not audio_path.is_absolute():
        audio_path = base_dir / audio_path

    duration = row.get("duration_s")
    sample_rate = row.get("sample_rate")
    if check_audio and not audio_path.exists():
        raise MissingAudioError(f"audio file not found: {audio_path}", clip_id)
    if duration in (None, ""):
        if not audio_path.exists():
            raise MissingAudioError(f"audio file not found: {audio_path}", clip_id)
        duration, sr = _audio_info(audio_path)
        sample_rate = sample_rate or sr
    try:
        duration = float(duration)
        sample_rate = int(float(sample_rate)) if sample_rate not in (None, "") else None
    except ValueError as exc:
        raise ParseError(str(exc), clip_id) from None

    split = (row.get("split") or "").strip()
    if split and split not in SPLITS:
        raise ValidationError(f"unknown split tag {split!r}", clip_id)

    rec = ClipRecord(
        clip_id=clip_id,
        audio_path=audio_path,
        duration_s=duration,
        scene=str(row["scene"]).strip(),
        aq_responses=aq,
        event_multihot=events,
        sample_rate=sample_rate,
    )
    rec.validate()
    return rec, split


def load_manifest(path, check_audio=True):
    """Read and validate a manifest (``.csv`` or ``.jsonl``)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    base_dir = path.parent
    if path.suffix in (".jsonl", ".ndjson"):
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ParseError(f"line {lineno}: {exc}") from None
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError("empty manifest")
            absent = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
            if absent:
                raise ParseError(f"manifest header lacks columns {absent}")
            rows = list(reader)

    records, splits = [], []
    for row in rows:
        rec, split = _parse_row(row, base_dir, check_audio)
        records.append(rec)
        splits.append(split)
    return DatasetManifest(records=records, splits=splits, source=path)


def write_manifest(manifest, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base_dir = path.parent.resolve()
    columns = MANIFEST_COLUMNS + OPTIONAL_COLUMNS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for rec, split in zip(manifest.records, manifest.splits):
            audio = Path(rec.audio_path)
            try:
                audio = Path(os.path.relpath(audio.resolve(), base_dir))
            except ValueError:  # different drive on Windows
                audio = audio.resolve()
            row = {"clip_id": rec.clip_id, "audio_path": audio.as_posix(), "scene": rec.scene, "split": split}
            row.update(zip(EVENT_COLUMNS, rec.event_multihot))
            row.update(zip(AQ_COLUMNS, rec.aq_responses))
            row["duration_s"] = f"{rec.duration_s:.6f}"
            row["sample_rate"] = rec.sample_rate if rec.sample_rate is not None else ""
            writer.writerow(row)


def scaled_split_sizes(n_records, reference=REFERENCE_SPLIT_SIZES):
    """Split sizes for ``n_records`` clips in the proportions of ``reference``.

    Largest-remainder rounding; every split gets at least one clip when
    ``n_records >= 3``.
    """
    total = sum(reference)
    n = min(n_records, total)
    exact = [n * r / total for r in reference]
    sizes = [math.floor(x) for x in exact]
    order = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    if n >= 3:
        for i in range(3):
            while sizes[i] == 0:
                donor = max(range(3), key=lambda j: sizes[j])
                sizes[donor] -= 1
                sizes[i] += 1
    return tuple(sizes)


def split_dataset(manifest, sizes, seed):
    """Randomly assign disjoint train/val/test tags.

    Records not drawn into any split keep an empty tag.
    """
    n_train, n_val, n_test = (int(s) for s in sizes)
    if min(n_train, n_val, n_test) < 0:
        raise SizeError("split sizes must be non-negative")
    needed = n_train + n_val + n_test
    if needed > len(manifest):
        raise SizeError(f"requested {needed} clips but the manifest has {len(manifest)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(manifest))
    splits = [""] * len(manifest)
    bounds = (("train", 0, n_train), ("val", n_train, n_train + n_val), ("test", n_train + n_val, needed))
    for tag, lo, hi in bounds:
        for idx in order[lo:hi]:
            splits[idx] = tag
    return replace(manifest, splits=splits)


# --- tagger pseudo-labels -------------------------------------------------


@dataclass
class TaggerProbFile:
    clip_id: str
    granularity: str
    probs: np.ndarray = field(repr=False)

    def validate(self, duration_s=None):
        if self.granularity not in ("per_second", "per_clip"):
            raise ValidationError(f"unknown granularity {self.granularity!r}", self.clip_id)
        p = self.probs
        if not np.all(np.isfinite(p)) or p.min(initial=0.0) < 0.0 or p.max(initial=0.0) > 1.0:
            raise ValidationError("tagger probabilities must lie in [0, 1]", self.clip_id)
        if self.granularity == "per_clip" and p.ndim != 1:
            raise ValidationError("per_clip probabilities must be a vector", self.clip_id)
        if self.granularity == "per_second":
            if p.ndim != 2:
                raise ValidationError("per_second probabilities must be a matrix", self.clip_id)
            if duration_s is not None and p.shape[0] != math.floor(duration_s):
                raise ValidationError(
                    f"{p.shape[0]} per-second rows for a {duration_s:.2f} s clip", self.clip_id
                )


def load_tagger_probs(path, duration_s=None):
    """Read one tagger output file (JSON with clip_id, granularity, probs)."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    try:
        tp = TaggerProbFile(obj["clip_id"], obj["granularity"], np.asarray(obj["probs"], dtype=float))
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from None
    tp.validate(duration_s)
    return tp


def save_tagger_probs(tp, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"clip_id": tp.clip_id, "granularity": tp.granularity, "probs": np.round(tp.probs, 6).tolist()}, fh)


def binarize_probs(probs, threshold):
    """Hard labels: 1 where ``probs > threshold`` (strict), else 0."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return (np.asarray(probs) > threshold).astype(np.int8)


def rank_event_occurrences(hard_labels, n_classes=N_TAGGER_CLASSES):
    """Count 1-bits per class over all segments, most frequent first.

    Ties are broken by ascending class index.
    """
    rows = [np.atleast_2d(np.asarray(v)) for v in hard_labels]
    if rows:
        mat = np.concatenate(rows, axis=0)
        if mat.shape[1] != n_classes:
            raise ValueError(f"label vectors have length {mat.shape[1]}, expected {n_classes}")
        counts = mat.sum(axis=0).astype(int)
    else:
        counts = np.zeros(n_classes, dtype=int)
    order = sorted(range(n_classes), key=lambda i: (-counts[i], i))
    return [(i, int(counts[i])) for i in order]


def select_target_events(ranked, masker_classes, class_names=None, n_events=vocab.N_EVENTS,
                         canonical=vocab.EVENTS):
    """Build the target event vocabulary from occurrence ranking and maskers.

    Candidates are the masker classes (always kept) followed by ranked
    classes in descending count order, de-duplicated, until ``n_events``
    names are collected. The result lists names from ``canonical`` in
    canonical order first, then any other names in candidate order.
    """
    def name_of(c):
        if isinstance(c, str):
            return c
        if class_names is None:
            raise ValueError("class_names is required to map class indices to names")
        return class_names[c]

    candidates = []
    for name in list(masker_classes) + [name_of(c) for c, _ in ranked]:
        if name not in candidates:
            candidates.append(name)
    if len(candidates) < n_events:
        raise VocabularyError(f"only {len(candidates)} candidate classes, {n_events} required")
    chosen = candidates[:n_events]
    rank = {name: i for i, name in enumerate(canonical)}
    known = sorted((c for c in chosen if c in rank), key=rank.__getitem__)
    return known + [c for c in chosen if c not in rank]


def clip_event_labels(clip_probs, class_names, vocabulary=vocab.EVENTS, threshold=0.1):
    """15-bit event labels from one clip-level tagger probability vector."""
    index = {name: i for i, name in enumerate(class_names)}
    missing = [v for v in vocabulary if v not in index]
    if missing:
        raise VocabularyError(f"tagger class list lacks {missing}")
    picked = np.asarray(clip_probs)[[index[v] for v in vocabulary]]
    return binarize_probs(picked, threshold)


def load_class_names(path):
    """Tagger class list: CSV with ``index,name`` rows (header optional)."""
    names = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip().isdigit():
                continue
            names[int(row[0])] = row[-1].strip()
    return [names[i] for i in range(len(names))]
