"""On-disk feature cache: one ``.npz`` per clip holding both matrices.

Each file carries a JSON metadata record (format version, feature-config
hash, frame hops, shapes).  Files written by another format version are
rejected; files written under a different feature config are treated as
stale and recomputed by :func:`extract_all`.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..errors import CacheMissError, CacheVersionError
from .loudness import LoudnessSeries
from .mel import MelSpectrogram
from .pipeline import FeatureConfig, FeaturePair, features_from_wav

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class FeatureCache:
    def __init__(self, root, config=FeatureConfig()):
        self.root = Path(root)
        self.config = config
        self.config_hash = config.hash()

    def path(self, clip_id):
        return self.root / f"{clip_id}.npz"

    def write(self, pair: FeaturePair):
        self.root.mkdir(parents=True, exist_ok=True)
        meta = {
            "format_version": FORMAT_VERSION,
            "config_hash": self.config_hash,
            "clip_id": pair.clip_id,
            "mel_hop_ms": pair.mel.frame_hop_ms,
            "mel_window_ms": pair.mel.window_ms,
            "loudness_hop_ms": pair.loudness.frame_hop_ms,
            "field_type": pair.loudness.field_type,
            "mel_shape": list(pair.mel.values.shape),
            "loudness_shape": list(pair.loudness.values.shape),
        }
        tmp = self.path(pair.clip_id).with_suffix(".tmp.npz")
        np.savez(tmp, mel=pair.mel.values.astype(np.float32), loudness=pair.loudness.values.astype(np.float32),
                 meta=np.array(json.dumps(meta, sort_keys=True)))
        tmp.replace(self.path(pair.clip_id))

    def read_meta(self, clip_id):
        path = self.path(clip_id)
        if not path.exists():
            raise CacheMissError(clip_id, path)
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise CacheVersionError(
                f"{path}: cache format {meta.get('format_version')} is not the supported version {FORMAT_VERSION}"
            )
        return meta

    def is_fresh(self, clip_id):
        try:
            return self.read_meta(clip_id)["config_hash"] == self.config_hash
        except (CacheMissError, CacheVersionError):
            return False

    def load(self, clip_id):
        meta = self.read_meta(clip_id)
        if meta["config_hash"] != self.config_hash:
            raise CacheVersionError(f"{self.path(clip_id)} was written with feature config {meta['config_hash']}")
        with np.load(self.path(clip_id)) as data:
            mel, loud = data["mel"], data["loudness"]
        return FeaturePair(
            clip_id,
            MelSpectrogram(mel, meta["mel_hop_ms"], meta["mel_window_ms"]),
            LoudnessSeries(loud, meta["loudness_hop_ms"], meta["field_type"]),
        )


def extract_all(records, cache: FeatureCache, jobs=1):
    """Fill the cache for ``records``; returns ``(n_computed, n_skipped)``."""
    todo = [r for r in records if not cache.is_fresh(r.clip_id)]

    def work(rec):
        cache.write(features_from_wav(rec.clip_id, rec.audio_path, cache.config))
        logger.info("features cached for %s", rec.clip_id)

    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, todo))
    else:
        for rec in todo:
            work(rec)
    return len(todo), len(records) - len(todo)
