"""Mapping from digital sample values to sound pressure in pascal."""

from dataclasses import dataclass

import numpy as np

P_REF = 2e-5  # Pa


def spl(pressure):
    """Sound pressure level (dB re 20 uPa) of a pressure waveform."""
    rms = np.sqrt(np.mean(np.square(pressure)))
    return 20.0 * np.log10(max(rms, 1e-300) / P_REF)


def sine(frequency, level_db, duration_s, sample_rate, amplitude=None):
    """Sine with RMS pressure for ``level_db`` (or an explicit peak amplitude)."""
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    if amplitude is None:
        amplitude = np.sqrt(2.0) * P_REF * 10.0 ** (level_db / 20.0)
    return amplitude * np.sin(2.0 * np.pi * frequency * t)


@dataclass(frozen=True)
class CalibrationRef:
    """Digital RMS of a recorded calibration tone and the SPL it represents.

    The default treats a 1 kHz sine with digital peak 0.01 (-40 dBFS) as
    60 dB SPL, so a full-scale sine maps to 100 dB SPL.
    """

    reference_rms: float = 0.01 / np.sqrt(2.0)
    reference_db: float = 60.0
    frequency: float = 1000.0

    def __post_init__(self):
        if not self.reference_rms > 0:
            raise ValueError("reference RMS must be positive")

    @classmethod
    def from_waveform(cls, waveform, reference_db=60.0, frequency=1000.0):
        rms = float(np.sqrt(np.mean(np.square(np.asarray(waveform, dtype=np.float64)))))
        return cls(rms, reference_db, frequency)

    @classmethod
    def from_wav(cls, path, reference_db=60.0):
        from .audio import read_wav

        wave, _ = read_wav(path)
        return cls.from_waveform(wave, reference_db)

    @property
    def gain(self):
        """Pascal per digital unit."""
        return P_REF * 10.0 ** (self.reference_db / 20.0) / self.reference_rms


def calibrate(waveform, calibration=CalibrationRef()):
    """Scale a digital waveform to sound pressure in pascal."""
    return np.asarray(waveform, dtype=np.float64) * calibration.gain
