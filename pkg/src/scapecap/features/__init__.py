"""Acoustic input representations: log-mel spectrogram and Zwicker loudness."""

from .cache import FORMAT_VERSION, FeatureCache, extract_all
from .calibration import CalibrationRef, calibrate, sine, spl
from .loudness import LoudnessSeries, zwicker_loudness
from .mel import LOG_FLOOR, LOG_FLOOR_DB, MelSpectrogram, log_mel
from .pipeline import FeatureConfig, FeaturePair, features_from_wav, features_from_waveform

__all__ = [
    "FORMAT_VERSION", "FeatureCache", "extract_all", "CalibrationRef", "calibrate", "sine", "spl",
    "LoudnessSeries", "zwicker_loudness", "LOG_FLOOR", "LOG_FLOOR_DB", "MelSpectrogram", "log_mel",
    "FeatureConfig", "FeaturePair", "features_from_wav", "features_from_waveform",
]
