"""Log-mel spectrogram: 32 ms Hamming window, 10 ms hop, 64 bands."""

from dataclasses import dataclass

import numpy as np

from ..errors import TooShortError

LOG_FLOOR = 1e-10
# 10 * log10(LOG_FLOOR): value of every bin for digital silence.
LOG_FLOOR_DB = -100.0


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (n_frames, n_mels)
    frame_hop_ms: float = 10.0
    window_ms: float = 32.0

    @property
    def n_frames(self):
        return self.values.shape[0]


def hz_to_mel(f):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    logstep = np.log(6.4) / 27.0
    return np.where(f >= min_log_hz, min_log_hz / f_sp + np.log(np.maximum(f, 1e-12) / min_log_hz) / logstep, f / f_sp)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_mel = 1000.0 / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(m >= min_log_mel, 1000.0 * np.exp(logstep * (m - min_log_mel)), f_sp * m)


def mel_band_edges(n_mels, fmin, fmax):
    """``n_mels + 2`` frequencies: lower edge, centres, upper edge."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


def mel_filterbank(sample_rate, n_fft, n_mels=64, fmin=50.0, fmax=14000.0):
    """Triangular, area-normalised filters of shape ``(n_mels, n_fft // 2 + 1)``."""
    edges = mel_band_edges(n_mels, fmin, fmax)
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    lower = (freqs[None, :] - edges[:-2, None]) / (edges[1:-1] - edges[:-2])[:, None]
    upper = (edges[2:, None] - freqs[None, :]) / (edges[2:] - edges[1:-1])[:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


def log_mel(waveform, sample_rate, n_mels=64, window_ms=32.0, hop_ms=10.0, fmin=50.0, fmax=14000.0):
    """Log-mel energies in dB, floored at ``LOG_FLOOR``.

    Frame ``t`` is centred on sample ``t * hop`` (the signal is reflect-padded
    by half a window), giving ``floor(len / hop)`` frames.
    """
    x = np.asarray(waveform, dtype=np.float64)
    if sample_rate <= 2 * fmax:
        raise ValueError(f"sample rate {sample_rate} Hz cannot represent a mel band edge at {fmax} Hz")
    win = int(round(window_ms * 1e-3 * sample_rate))
    hop = int(round(hop_ms * 1e-3 * sample_rate))
    if x.size < win:
        raise TooShortError(f"{x.size} samples is shorter than one {window_ms} ms window")
    n_fft = 1 << (win - 1).bit_length()
    n_frames = x.size // hop

    padded = np.pad(x, (win // 2, win // 2), mode="reflect")
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * np.hamming(win)[None, :]
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    mel = power @ mel_filterbank(sample_rate, n_fft, n_mels, fmin, fmax).T
    return MelSpectrogram(10.0 * np.log10(np.maximum(mel, LOG_FLOOR)), hop_ms, window_ms)
