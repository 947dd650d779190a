"""Time-varying loudness after Zwicker (ISO 532-1:2017, method for
arbitrary non-stationary sounds).

Processing chain, all at 48 kHz input:

1. 28 one-third-octave bands, 25 Hz to 12.5 kHz (order-3 Butterworth
   band-passes designed here rather than the standard's coefficient table).
2. Squaring, three cascaded first-order smoothers with a band-dependent
   time constant, decimation to 2 kHz, conversion to band levels.
3. Core loudness per critical band from the band levels (low-frequency
   equal-loudness corrections, ear transmission, threshold in quiet).
4. Non-linear temporal decay of the core loudness (forward masking).
5. Spectral masking: upper slopes of the specific-loudness pattern,
   integrated over critical-band rate to total loudness.
6. Temporal weighting of total loudness and decimation to 500 Hz
   (one value every 2 ms).

The numeric tables below are the ones tabulated in the standard.
"""

from dataclasses import dataclass
from math import exp, sqrt

import numba
import numpy as np
from scipy import signal

from ..errors import TooShortError
from .audio import resample
from .calibration import P_REF

SAMPLE_RATE = 48000
LEVEL_RATE = 2000
OUTPUT_RATE = 500
FIELD_TYPES = ("free", "diffuse")

THIRD_OCTAVE_CENTERS = 1000.0 * 10.0 ** (np.arange(-16, 12) / 10.0)
NOMINAL_CENTERS = np.array([
    25, 31.5, 40, 50, 63, 80, 100, 125, 160, 200, 250, 315, 400, 500, 630, 800,
    1000, 1250, 1600, 2000, 2500, 3150, 4000, 5000, 6300, 8000, 10000, 12500,
])

# Level ranges and reductions for the 11 lowest bands (up to 250 Hz).
RAP = np.array([45.0, 55.0, 65.0, 71.0, 80.0, 90.0, 100.0, 120.0])
DLL = np.array([
    [-32, -24, -16, -10, -5, 0, -7, -3, 0, -2, 0],
    [-29, -22, -15, -10, -4, 0, -7, -2, 0, -2, 0],
    [-27, -19, -14, -9, -4, 0, -6, -2, 0, -2, 0],
    [-25, -17, -12, -9, -3, 0, -5, -2, 0, -2, 0],
    [-23, -16, -11, -7, -3, 0, -4, -1, 0, -1, 0],
    [-20, -14, -10, -6, -3, 0, -4, -1, 0, -1, 0],
    [-18, -12, -9, -6, -2, 0, -3, -1, 0, -1, 0],
    [-15, -10, -8, -4, -2, 0, -3, -1, 0, -1, 0],
], dtype=np.float64)

# Critical-band level at threshold in quiet.
LTQ = np.array([30, 18, 12, 8, 7, 6, 5, 4, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3], dtype=np.float64)
# Ear transmission (free field).
A0 = np.array([0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -0.5, -1.6, -3.2, -5.4, -5.6, -4.0, -1.5, 2.0, 5.0, 12.0])
# Diffuse minus free field level difference.
DDF = np.array([0, 0, 0.5, 0.9, 1.2, 1.6, 2.3, 2.8, 3.0, 2.0, 0, -1.4, -2.0, -1.9, -1.0, 0.5, 3.0, 4.0, 4.3, 4.0])
# One-third-octave to critical-band level adaptation.
DCB = np.array([-0.25, -0.6, -0.8, -0.8, -0.5, 0, 0.5, 1.1, 1.5, 1.7, 1.8, 1.8, 1.7, 1.6, 1.4, 1.2, 0.8, 0.5, 0, -0.5])
# Upper limits of the approximated critical bands (Bark).
ZUP = np.array([0.9, 1.8, 2.8, 3.5, 4.4, 5.4, 6.6, 7.9, 9.2, 10.6, 12.3, 13.8, 15.2, 16.7, 18.1, 19.3, 20.6, 21.8,
                22.7, 23.6, 24.0]) + 0.0001
# Specific-loudness ranges and upper-slope steepness per range and band group.
RNS = np.array([21.5, 18.0, 15.1, 11.5, 9.0, 6.1, 4.4, 3.1, 2.13, 1.36, 0.82, 0.42, 0.30, 0.22, 0.15, 0.10, 0.035, 0.0])
USL = np.array([
    [13.00, 8.20, 6.30, 5.50, 5.50, 5.50, 5.50, 5.50],
    [9.00, 7.50, 6.00, 5.10, 4.50, 4.50, 4.50, 4.50],
    [7.80, 6.70, 5.60, 4.90, 4.40, 3.90, 3.90, 3.90],
    [6.20, 5.40, 4.60, 4.00, 3.50, 3.20, 3.20, 3.20],
    [4.50, 3.80, 3.60, 3.20, 2.90, 2.70, 2.70, 2.70],
    [3.70, 3.00, 2.80, 2.35, 2.20, 2.20, 2.20, 2.20],
    [2.90, 2.30, 2.10, 1.90, 1.80, 1.70, 1.70, 1.70],
    [2.40, 1.70, 1.50, 1.35, 1.30, 1.30, 1.30, 1.30],
    [1.95, 1.45, 1.30, 1.15, 1.10, 1.10, 1.10, 1.10],
    [1.50, 1.20, 0.94, 0.86, 0.82, 0.82, 0.82, 0.82],
    [0.72, 0.67, 0.64, 0.63, 0.62, 0.62, 0.62, 0.62],
    [0.59, 0.53, 0.51, 0.50, 0.42, 0.42, 0.42, 0.42],
    [0.40, 0.33, 0.26, 0.24, 0.24, 0.22, 0.22, 0.22],
    [0.27, 0.21, 0.20, 0.18, 0.17, 0.17, 0.17, 0.17],
    [0.16, 0.15, 0.14, 0.12, 0.11, 0.11, 0.11, 0.11],
    [0.12, 0.11, 0.10, 0.08, 0.08, 0.08, 0.08, 0.08],
    [0.09, 0.08, 0.07, 0.06, 0.06, 0.06, 0.06, 0.05],
    [0.06, 0.05, 0.03, 0.02, 0.02, 0.02, 0.02, 0.02],
])

# Non-linear decay time constants (s) and virtual upsampling factor.
T_SHORT, T_LONG, T_VAR = 0.005, 0.015, 0.075
N_INNER = 24
# Temporal weighting of total loudness.
TW_TAU = (0.0035, 0.070)
TW_WEIGHTS = (0.47, 0.53)

_INTENSITY_FLOOR = 1e-30


@dataclass
class LoudnessSeries:
    values: np.ndarray  # (n_frames, 1), sone
    frame_hop_ms: float = 2.0
    field_type: str = "free"

    @property
    def n_frames(self):
        return self.values.shape[0]


def third_octave_filters(sample_rate=SAMPLE_RATE, order=3):
    """Band-pass SOS for the 28 bands with base-10 exact band edges."""
    filters = []
    for fc in THIRD_OCTAVE_CENTERS:
        lo, hi = fc * 10 ** (-0.05), fc * 10 ** 0.05
        filters.append(signal.butter(order, [lo, hi], btype="bandpass", fs=sample_rate, output="sos"))
    return filters


_FILTERS = None


def _filters():
    global _FILTERS
    if _FILTERS is None:
        _FILTERS = third_octave_filters()
    return _FILTERS


def band_levels(pressure):
    """One-third-octave band levels (dB) at 2 kHz, shape ``(28, n)``.

    ``pressure`` is a 48 kHz waveform in pascal.
    """
    x = np.asarray(pressure, dtype=np.float64)
    dec = SAMPLE_RATE // LEVEL_RATE
    n_out = -(-x.size // dec)
    levels = np.empty((len(THIRD_OCTAVE_CENTERS), n_out))
    for b, (fc, sos) in enumerate(zip(NOMINAL_CENTERS, _filters())):
        y = signal.sosfilt(sos, x) ** 2
        tau = 2.0 / (3.0 * min(fc, 1000.0))
        a1 = np.exp(-1.0 / (SAMPLE_RATE * tau))
        for _ in range(3):
            y = signal.lfilter([1.0 - a1], [1.0, -a1], y)
        levels[b] = 10.0 * np.log10(np.maximum(y[::dec], _INTENSITY_FLOOR) / P_REF**2)
    return levels


def core_loudness(levels, field_type="free"):
    """Core loudness per critical band, shape ``(21, n)``; band 21 is zero."""
    if field_type not in FIELD_TYPES:
        raise ValueError(f"field_type must be one of {FIELD_TYPES}")
    levels = np.atleast_2d(levels)
    n = levels.shape[1]

    low = levels[:11]
    # First range j whose upper limit is not exceeded (last range otherwise).
    exceeded = low[None, :, :] > (RAP[:, None, None] - DLL[:, :, None])
    j = np.minimum(np.argmin(exceeded, axis=0) + np.where(exceeded.all(axis=0), 7, 0), 7)
    xp = low + DLL[j, np.arange(11)[:, None]]
    ti = 10.0 ** (xp / 10.0)
    groups = np.stack([ti[0:6].sum(0), ti[6:9].sum(0), ti[9:11].sum(0)])
    lcb = 10.0 * np.log10(np.maximum(groups, _INTENSITY_FLOOR))

    le = np.concatenate([lcb, levels[11:28]], axis=0) - A0[:, None]
    if field_type == "diffuse":
        le = le + DDF[:, None]
    above = le > LTQ[:, None]
    le = np.where(above, le - DCB[:, None], le)
    s = 0.25
    nm = 0.0635 * 10.0 ** (0.025 * LTQ[:, None]) * ((1 - s + s * 10.0 ** ((le - LTQ[:, None]) / 10.0)) ** 0.25 - 1)
    nm = np.where(above, np.maximum(nm, 0.0), 0.0)

    korry = np.minimum(0.4 + 0.32 * nm[0] ** 0.2, 1.0)
    nm[0] = nm[0] * korry
    return np.vstack([nm, np.zeros((1, n))])


def _decay_coefficients(rate=LEVEL_RATE, inner=N_INNER):
    dt = 1.0 / (rate * inner)
    p = (T_VAR + T_LONG) / (T_VAR * T_SHORT)
    q = 1.0 / (T_SHORT * T_VAR)
    l1 = -p / 2 + sqrt(p * p / 4 - q)
    l2 = -p / 2 - sqrt(p * p / 4 - q)
    den = T_VAR * (l1 - l2)
    e1, e2 = exp(l1 * dt), exp(l2 * dt)
    return np.array([
        (e1 - e2) / den,
        ((T_VAR * l2 + 1) * e1 - (T_VAR * l1 + 1) * e2) / den,
        ((T_VAR * l1 + 1) * e1 - (T_VAR * l2 + 1) * e2) / den,
        (T_VAR * l1 + 1) * (T_VAR * l2 + 1) * (e1 - e2) / den,
        exp(-dt / T_LONG),
        exp(-dt / T_VAR),
    ])


@numba.njit(cache=True, nogil=True)
def _nonlinear_decay(core, b, inner):
    n_bands, n = core.shape
    out = np.empty_like(core)
    for band in range(n_bands):
        uo_last = 0.0
        u2_last = 0.0
        for t in range(n):
            nxt = core[band, t + 1] if t + 1 < n else core[band, t]
            step = (nxt - core[band, t]) / inner
            for k in range(inner):
                ui = core[band, t] + k * step
                if ui < uo_last:
                    if uo_last > u2_last:
                        u2 = uo_last * b[0] - u2_last * b[1]
                        uo = uo_last * b[2] - u2_last * b[3]
                        if ui > uo:
                            uo = ui
                        if u2 > uo:
                            u2 = uo
                    else:
                        uo = uo_last * b[4]
                        if ui > uo:
                            uo = ui
                        u2 = uo
                else:
                    uo = ui
                    if abs(ui - uo_last) < 1e-5 and uo <= u2_last:
                        u2 = ui
                    else:
                        u2 = (u2_last - ui) * b[5] + ui
                uo_last = uo
                u2_last = u2
                if k == 0:
                    out[band, t] = uo
    return out


def nonlinear_decay(core):
    """Forward-masking decay applied independently to each critical band."""
    return _nonlinear_decay(np.ascontiguousarray(core, dtype=np.float64), _decay_coefficients(), N_INNER)


@numba.njit(cache=True, nogil=True)
def _total_loudness(nm, zup, rns, usl):
    n_bands, n = nm.shape
    total = np.zeros(n)
    n_rns = rns.shape[0]
    for t in range(n):
        acc = 0.0
        n1 = 0.0
        z1 = 0.0
        n2 = 0.0
        j = 0
        for i in range(n_bands):
            ig = i - 1
            if ig > 7:
                ig = 7
            level = nm[i, t]
            while z1 < zup[i]:
                if n1 > level:
                    # Upper slope of the previous band masks this one.
                    n2 = rns[j]
                    if n2 < level:
                        n2 = level
                    dz = (n1 - n2) / usl[j, ig]
                    z2 = z1 + dz
                    if z2 > zup[i]:
                        z2 = zup[i]
                        dz = z2 - z1
                        n2 = n1 - dz * usl[j, ig]
                    acc += dz * (n1 + n2) / 2.0
                else:
                    if n1 < level:
                        j = 0
                        while j < n_rns - 1 and rns[j] >= level:
                            j += 1
                    z2 = zup[i]
                    n2 = level
                    acc += n2 * (z2 - z1)
                while j < n_rns - 1 and n2 <= rns[j]:
                    j += 1
                z1 = z2
                n1 = n2
        total[t] = acc if acc > 0.0 else 0.0
    return total


def total_loudness(nm):
    """Integrate the specific-loudness pattern (with upper slopes) per frame."""
    return _total_loudness(np.ascontiguousarray(nm, dtype=np.float64), ZUP, RNS, USL)


@numba.njit(cache=True, nogil=True)
def _lowpass_interp(x, a1, inner):
    n = x.shape[0]
    out = np.empty(n)
    y = 0.0
    for t in range(n):
        nxt = x[t + 1] if t + 1 < n else x[t]
        step = (nxt - x[t]) / inner
        for k in range(inner):
            y = a1 * y + (1.0 - a1) * (x[t] + k * step)
            if k == 0:
                out[t] = y
    return out


def temporal_weighting(total):
    out = np.zeros_like(total)
    for tau, w in zip(TW_TAU, TW_WEIGHTS):
        a1 = np.exp(-1.0 / (LEVEL_RATE * N_INNER * tau))
        out += w * _lowpass_interp(np.ascontiguousarray(total, dtype=np.float64), a1, N_INNER)
    return out


def zwicker_loudness(pressure, sample_rate, field_type="free"):
    """Total loudness in sone every 2 ms for a calibrated waveform (Pa).

    Input at other rates is resampled to 48 kHz first.
    """
    x = resample(np.asarray(pressure, dtype=np.float64), sample_rate, SAMPLE_RATE)
    if x.size < SAMPLE_RATE // OUTPUT_RATE:
        raise TooShortError("waveform is shorter than one 2 ms loudness frame")
    levels = band_levels(x)
    core = core_loudness(levels, field_type)
    core = nonlinear_decay(core)
    total = temporal_weighting(total_loudness(core))
    values = total[:: LEVEL_RATE // OUTPUT_RATE]
    return LoudnessSeries(np.maximum(values, 0.0)[:, None], 1000.0 / OUTPUT_RATE, field_type)


def stationary_loudness(levels, field_type="free"):
    """Loudness (sone) of a stationary sound from its 28 band levels (dB)."""
    nm = core_loudness(np.asarray(levels, dtype=np.float64)[:, None], field_type)
    return float(total_loudness(nm)[0])
