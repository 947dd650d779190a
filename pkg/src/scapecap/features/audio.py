"""WAV reading, channel mixing and resampling."""

from fractions import Fraction

import numpy as np
from scipy import signal
from scipy.io import wavfile


def to_float(data):
    """Integer PCM to float in [-1, 1); float input is passed through."""
    if data.dtype.kind == "f":
        return data.astype(np.float64)
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    info = np.iinfo(data.dtype)
    return data.astype(np.float64) / float(-info.min)


def mix_to_mono(data):
    """Average channels; binaural input becomes a single diotic channel."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        return data
    return data.mean(axis=1)


def read_wav(path):
    """Return ``(mono_waveform, sample_rate)`` with samples as float64."""
    sr, data = wavfile.read(path)
    return mix_to_mono(to_float(data)), int(sr)


def write_wav(path, waveform, sample_rate):
    """Write float waveform as 16-bit PCM (clipped to [-1, 1])."""
    pcm = np.clip(np.asarray(waveform), -1.0, 1.0 - 2**-15)
    wavfile.write(path, int(sample_rate), (pcm * 32768.0).astype(np.int16))


def resample(waveform, sr_in, sr_out):
    if sr_in == sr_out:
        return np.asarray(waveform, dtype=np.float64)
    ratio = Fraction(int(sr_out), int(sr_in))
    return signal.resample_poly(waveform, ratio.numerator, ratio.denominator)
