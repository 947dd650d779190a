"""Synthetic end-to-end fixture: short clips, tagger outputs and ratings.

Everything is generated from a seed, so tests and the CLI can run the whole
pipeline without access to a real soundscape corpus.
"""

import csv
import logging
from pathlib import Path

import numpy as np
from scipy import signal

from . import vocab
from .ingest import ClipRecord, DatasetManifest, TaggerProbFile, save_tagger_probs, scaled_split_sizes, \
    split_dataset, write_manifest
from .features.audio import write_wav

logger = logging.getLogger(__name__)

SAMPLE_RATE = 32000
DURATION_S = 3.0
N_CLASSES = 527

SCENE_EVENTS = {
    "park": ("Bird", "Animal", "Wind", "Water", "Natural sounds", "Outside, rural or natural", "Silence"),
    "street traffic": ("Vehicle", "Traffic", "Sounds of things", "Noise", "Environment and background"),
    "public square": ("Speech", "Human sounds", "Music", "Environment and background", "Sounds of things"),
}
# Typical affective ratings per scene (pleasant, eventful, chaotic, vibrant,
# uneventful, calm, annoying, monotonous).
SCENE_AQ = {
    "park": (4, 2, 1, 3, 4, 5, 1, 2),
    "street traffic": (2, 3, 4, 2, 2, 1, 4, 4),
    "public square": (3, 4, 3, 4, 2, 3, 2, 2),
}
FIXTURE_SCENES = ("park", "street traffic", "public square", "park", "street traffic", "public square", "park",
                  "street traffic")
# Tagger class indices that carry the 15 event names in the fixture class list.
EVENT_CLASS_INDEX = {name: 7 + 31 * i for i, name in enumerate(vocab.EVENTS)}


def fixture_class_names():
    names = [f"Class {i}" for i in range(N_CLASSES)]
    for name, idx in EVENT_CLASS_INDEX.items():
        names[idx] = name
    return names


def _band_noise(rng, n, lo, hi, sr):
    sos = signal.butter(4, [lo, hi], btype="bandpass", fs=sr, output="sos")
    x = signal.sosfilt(sos, rng.standard_normal(n))
    return x / (np.std(x) + 1e-12)


def synth_clip(scene, rng, duration_s=DURATION_S, sr=SAMPLE_RATE):
    """A few seconds of audio whose spectrum is characteristic of ``scene``."""
    n = int(round(duration_s * sr))
    t = np.arange(n) / sr
    if scene == "park":
        x = 0.3 * _band_noise(rng, n, 80, 600, sr)  # wind
        for onset in rng.uniform(0, duration_s - 0.2, size=6):  # chirps
            f0 = rng.uniform(3000, 4500)
            m = (t >= onset) & (t < onset + 0.12)
            tau = t[m] - onset
            x[m] += np.sin(2 * np.pi * (f0 * tau + 8000 * tau**2)) * np.hanning(m.sum())
        gain = 0.02
    elif scene == "street traffic":
        x = _band_noise(rng, n, 40, 400, sr) + 0.5 * np.sin(2 * np.pi * 85 * t) + 0.2 * _band_noise(rng, n, 1000,
                                                                                                      4000, sr)
        gain = 0.06
    elif scene == "public square":
        env = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(3, 5) * t)
        x = env * _band_noise(rng, n, 300, 3000, sr)
        x += 0.3 * np.sin(2 * np.pi * 440 * t) * (np.sin(2 * np.pi * 2 * t) > 0)
        gain = 0.04
    else:
        raise ValueError(f"unknown scene {scene!r}")
    return gain * x / (np.max(np.abs(x)) + 1e-12)


def synth_tagger_probs(events, rng, n_seconds):
    """Per-second tagger output: present events above 0.5, all else below."""
    probs = rng.uniform(0.0, 0.05, size=(n_seconds, N_CLASSES))
    for name in events:
        probs[:, EVENT_CLASS_INDEX[name]] = rng.uniform(0.55, 0.95, size=n_seconds)
    return probs


def make_fixture(root, n_clips=8, seed=0, duration_s=DURATION_S, sample_rate=SAMPLE_RATE):
    """Write audio, manifest, tagger outputs, class list and ratings under ``root``.

    Returns a dict of the written paths.
    """
    root = Path(root)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    (root / "tagger").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_clips):
        scene = FIXTURE_SCENES[i % len(FIXTURE_SCENES)]
        clip_id = f"clip_{i:02d}"
        audio_path = root / "audio" / f"{clip_id}.wav"
        write_wav(audio_path, synth_clip(scene, rng, duration_s, sample_rate), sample_rate)

        pool = SCENE_EVENTS[scene]
        # Rotate through the scene's events so every name occurs somewhere.
        present = [pool[(3 * i + j) % len(pool)] for j in range(3)]
        events = tuple(int(name in present) for name in vocab.EVENTS)
        aq = tuple(int(np.clip(v + rng.integers(-1, 2), 1, 5)) for v in SCENE_AQ[scene])
        records.append(ClipRecord(clip_id, audio_path, duration_s, scene, aq, events, sample_rate))
        save_tagger_probs(TaggerProbFile(clip_id, "per_second", synth_tagger_probs(present, rng, int(duration_s))),
                          root / "tagger" / f"{clip_id}.json")

    manifest = split_dataset(DatasetManifest(records), scaled_split_sizes(n_clips), seed)
    write_manifest(manifest, root / "manifest.csv")

    with open(root / "class_names.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "display_name"])
        for idx, name in enumerate(fixture_class_names()):
            writer.writerow([idx, name])

    write_ratings(root / "ratings.csv", [r.clip_id for r in records], rng)
    logger.info("fixture with %d clips written to %s", n_clips, root)
    return {"root": root, "manifest": root / "manifest.csv", "tagger_dir": root / "tagger",
            "class_names": root / "class_names.csv", "ratings": root / "ratings.csv"}


def write_ratings(path, caption_ids, rng, n_raters=4):
    """Caption-quality ratings for expert and system captions of each clip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rater_id", "caption_id", "source", "dataset", "P", "R", "F", "C", "I"])
        for k, cid in enumerate(caption_ids):
            dataset = "D1" if k % 2 == 0 else "D2"
            for source, shift in (("expert", 0.3), ("system", 0.0)):
                for r in range(n_raters):
                    p = np.clip(np.round(rng.normal(3.6 + shift, 0.6) * 2) / 2, 1, 5)
                    rr = np.clip(np.round(rng.normal(3.7 + shift, 0.6) * 2) / 2, 1, 5)
                    f, c, i = (float(-rng.choice([0, 0, 0, 0.5, 1])) for _ in range(3))
                    writer.writerow([f"rater{r}", cid, source, dataset, p, rr, f, c, i])
