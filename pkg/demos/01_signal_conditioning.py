"""Tour of the core signal conditioning: band-pass design, zero-phase
filtering, z-normalization, Hilbert envelopes, resampling, and windowing.
"""

import numpy as np

from bodyppg import (
    BandpassSpec,
    Waveform,
    WindowPlan,
    bandpass_zero_phase,
    design_bandpass,
    hilbert_envelope,
    resample_linear,
    windows,
    z_normalize,
)

fs = 90.0
t = np.arange(int(30 * fs)) / fs

# a 72 bpm tone buried in drift and high-frequency noise
rng = np.random.default_rng(0)
raw = (
    np.sin(2 * np.pi * 1.2 * t)
    + 0.8 * np.sin(2 * np.pi * 0.05 * t)       # slow drift
    + 0.5 * np.sin(2 * np.pi * 8.0 * t)        # out-of-band hum
    + 0.2 * rng.standard_normal(t.size)
)
wave = Waveform(raw, fs)

spec = BandpassSpec(order=4, low_bpm=40.0, high_bpm=180.0)
coeffs = design_bandpass(spec, fs)
print("band-pass response at the cutoffs (dB):", np.round(coeffs.response_db([40 / 60, 180 / 60]), 2))
print("worst pole magnitude:", round(float(np.max(np.abs(coeffs.poles()))), 4))

filtered = bandpass_zero_phase(wave, coeffs)
trim = int(2 * fs)
residual = filtered.samples[trim:-trim] - np.sin(2 * np.pi * 1.2 * t)[trim:-trim]
print("RMS error vs the buried tone after filtering:", round(float(np.sqrt(np.mean(residual**2))), 3))

normalized = z_normalize(filtered)
print("normalized mean / std:", round(float(np.mean(normalized.samples)), 9),
      round(float(np.std(normalized.samples)), 9))

# envelope of an amplitude-modulated tone
am = (1 + 0.5 * np.sin(2 * np.pi * 0.05 * t)) * np.sin(2 * np.pi * 1.2 * t)
env = hilbert_envelope(Waveform(am, fs))
print("envelope tracks the modulation peak:", round(float(np.max(env.samples[trim:-trim])), 3))

# resampling an oximeter-rate stream up to the sensor rate
sixty = Waveform(np.interp(np.arange(600) / 60.0, [0, 10], [60, 90]), 60.0)
four_hundred = resample_linear(sixty, 400.0)
print("resampled 60 Hz -> 400 Hz:", len(sixty), "->", len(four_hundred), "samples")

# sliding windows: 10 s every second over 30 s
plan = WindowPlan(length_s=10.0, stride_s=1.0)
print("10 s windows at 1 s stride over 30 s:", len(windows(wave, plan)))
