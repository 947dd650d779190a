"""Per-clip feature extraction: WAV file to (log-mel, loudness) pair."""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .audio import read_wav, resample
from .calibration import CalibrationRef, calibrate
from .loudness import LoudnessSeries, zwicker_loudness
from .mel import MelSpectrogram, log_mel


@dataclass(frozen=True)
class FeatureConfig:
    mel_sample_rate: int = 32000
    n_mels: int = 64
    window_ms: float = 32.0
    hop_ms: float = 10.0
    fmin: float = 50.0
    fmax: float = 14000.0
    field_type: str = "free"
    calibration: CalibrationRef = field(default_factory=CalibrationRef)

    def to_dict(self):
        d = asdict(self)
        d["calibration"] = {k: float(v) for k, v in d["calibration"].items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("calibration"), dict):
            d["calibration"] = CalibrationRef(**d["calibration"])
        return cls(**d)

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class FeaturePair:
    clip_id: str
    mel: MelSpectrogram
    loudness: LoudnessSeries


def features_from_waveform(clip_id, waveform, sample_rate, config=FeatureConfig()):
    """Mel from the digital signal, loudness from the calibrated one."""
    wave = np.asarray(waveform, dtype=np.float64)
    mel_in = resample(wave, sample_rate, config.mel_sample_rate)
    mel = log_mel(mel_in, config.mel_sample_rate, config.n_mels, config.window_ms, config.hop_ms,
                  config.fmin, config.fmax)
    loud = zwicker_loudness(calibrate(wave, config.calibration), sample_rate, config.field_type)
    return FeaturePair(clip_id, mel, loud)


def features_from_wav(clip_id, path, config=FeatureConfig()):
    wave, sr = read_wav(path)
    return features_from_waveform(clip_id, wave, sr, config)
