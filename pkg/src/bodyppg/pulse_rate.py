"""Pulse-rate estimation by short-time Fourier spectral-peak picking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import Waveform, WindowPlan, windows

__all__ = [
    "PulseRateSeries",
    "stft_pulse_rate",
    "spectral_peak",
    "DEFAULT_WINDOW_LENGTH_S",
    "DEFAULT_STRIDE_S",
    "DEFAULT_BAND_BPM",
]

DEFAULT_WINDOW_LENGTH_S = 10.0
DEFAULT_STRIDE_S = 1.0
DEFAULT_BAND_BPM = (40.0, 180.0)

# Zero-padding keeps the FFT bin spacing at or below this many bpm, so peak
# quantization error stays negligible next to real-world rate errors.
MAX_BIN_SPACING_BPM = 0.5


@dataclass(frozen=True)
class PulseRateSeries:
    """Timestamped pulse-rate estimates in beats per minute.

    ``times_s`` are window-center times on the session clock, strictly
    increasing. ``n_skipped`` counts windows whose rate could not be estimated
    (all-zero content); they carry no entry here and are excluded downstream.
    """

    times_s: np.ndarray
    rates_bpm: np.ndarray
    window_length_s: float
    band_bpm: tuple[float, float]
    n_skipped: int = 0

    def __post_init__(self):
        times = np.array(self.times_s, dtype=np.float64)
        rates = np.array(self.rates_bpm, dtype=np.float64)
        if times.shape != rates.shape or times.ndim != 1:
            raise ValueError("times_s and rates_bpm must be 1-D arrays of equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("entry times must be strictly increasing")
        lo, hi = self.band_bpm
        if rates.size and (rates.min() < lo - 1e-9 or rates.max() > hi + 1e-9):
            raise ValueError(f"rates fall outside the stated band {self.band_bpm}")
        times.flags.writeable = False
        rates.flags.writeable = False
        object.__setattr__(self, "times_s", times)
        object.__setattr__(self, "rates_bpm", rates)

    def __len__(self) -> int:
        return self.times_s.size

    @property
    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self.times_s.tolist(), self.rates_bpm.tolist()))

    def rate_at(self, time_s: float) -> float:
        """Rate of the entry nearest in time."""
        if len(self) == 0:
            raise ValueError("empty pulse-rate series")
        return float(self.rates_bpm[int(np.argmin(np.abs(self.times_s - time_s)))])


def _fft_length(n_window: int, sample_rate_hz: float) -> int:
    """Power of two giving bin spacing <= MAX_BIN_SPACING_BPM."""
    needed = max(n_window, int(np.ceil(60.0 * sample_rate_hz / MAX_BIN_SPACING_BPM)))
    return 1 << (needed - 1).bit_length()


def spectral_peak(
    spectrum: np.ndarray, bin_spacing_bpm: float, band: tuple[float, float]
) -> float:
    """Rate in bpm of the strongest in-band bin; ties go to the lower frequency.

    Raises:
        ValueError: if fewer than two spectrum bins fall inside the band.
    """
    spectrum = np.asarray(spectrum, dtype=np.float64)
    bpm = np.arange(spectrum.size) * bin_spacing_bpm
    in_band = (bpm >= band[0]) & (bpm <= band[1])
    if np.count_nonzero(in_band) < 2:
        raise ValueError(f"band {band} covers fewer than two spectrum bins")
    idx = np.flatnonzero(in_band)
    return float(bpm[idx[np.argmax(spectrum[idx])]])


def stft_pulse_rate(
    w: Waveform,
    plan: WindowPlan | None = None,
    band: tuple[float, float] = DEFAULT_BAND_BPM,
) -> PulseRateSeries:
    """Track pulse rate as the dominant spectral peak per sliding window.

    Each window is mean-subtracted, Hann-tapered, and zero-padded far enough
    that FFT bins are at most 0.5 bpm apart; the in-band magnitude peak is
    reported at the window-center time. All-zero windows are skipped and
    counted in ``n_skipped``.
    """
    if plan is None:
        plan = WindowPlan(DEFAULT_WINDOW_LENGTH_S, DEFAULT_STRIDE_S)
    lo, hi = band
    nyquist_bpm = w.sample_rate_hz / 2.0 * 60.0
    if not 0 < lo < hi < nyquist_bpm:
        raise ValueError(f"band {band} must sit inside (0, {nyquist_bpm:g}) bpm")

    segs = windows(w, plan)
    times: list[float] = []
    rates: list[float] = []
    n_skipped = 0
    if segs:
        n_len = len(segs[0][1])
        nfft = _fft_length(n_len, w.sample_rate_hz)
        taper = np.hanning(n_len)
        bin_spacing_bpm = 60.0 * w.sample_rate_hz / nfft
        for _, seg in segs:
            x = seg.samples - np.mean(seg.samples)
            if not np.any(x):
                n_skipped += 1
                continue
            mag = np.abs(np.fft.rfft(x * taper, nfft))
            rates.append(spectral_peak(mag, bin_spacing_bpm, band))
            times.append(seg.start_time_s + 0.5 * plan.length_s)
    return PulseRateSeries(
        times_s=np.asarray(times),
        rates_bpm=np.asarray(rates),
        window_length_s=plan.length_s,
        band_bpm=band,
        n_skipped=n_skipped,
    )
