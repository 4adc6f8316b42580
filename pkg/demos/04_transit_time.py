"""Pairwise pulse transit times from waveforms with injected arrival delays.

Five synthetic sites receive the same pulse with physiological delays of up
to 50 ms. The sliding cross-correlation recovers each pairwise offset at
integer-sample resolution, the matrix comes out exactly skew-symmetric, and
boxplot statistics summarize the per-window spread.
"""

import numpy as np

from bodyppg import lag_distribution_stats, phase_angle_deg, ptt_matrix, xcorr_lag
from bodyppg.signals import WindowPlan
from bodyppg.synth import PulseModel, constant_rate, synth_pulse

fs = 400.0
delays_ms = {"neck": 0.0, "tricep": 10.0, "forearm": 22.5, "knee": 32.5, "ankle": 50.0}

waves = []
for i, (site, delay_ms) in enumerate(delays_ms.items()):
    model = PulseModel(
        fs_hz=fs,
        duration_s=30.0,
        rate_profile=constant_rate(72.0),
        harmonics=((1.0, 1.0, 0.0), (2.0, 0.3, 0.7)),
        delay_s=delay_ms / 1000.0,
        noise_std=0.05,
        seed=10 + i,
    )
    waves.append((site, synth_pulse(model)))

matrix = ptt_matrix(waves, WindowPlan(5.0, 0.25), max_lag_s=0.3)
print("sites:", matrix.sites)
print("mean lags (ms), row leads column when positive:")
print(np.round(matrix.mean_lag_s * 1000.0, 2))
print("skew-symmetry residual:", float(np.max(np.abs(matrix.mean_lag_s + matrix.mean_lag_s.T))))

largest = ("neck", "ankle")
stats = lag_distribution_stats(matrix, largest)
print(f"{largest[0]} -> {largest[1]}: median {stats.median_s*1000:.2f} ms, "
      f"IQR [{stats.q1_s*1000:.2f}, {stats.q3_s*1000:.2f}] ms over {stats.n_windows} windows")

lag = matrix.mean_lag_s[matrix.site_index("neck"), matrix.site_index("ankle")]
print(f"phase angle of that offset at 72 bpm: {phase_angle_deg(lag, 72.0):.1f} degrees, "
      f"at 180 bpm: {phase_angle_deg(lag, 180.0):.1f} degrees")

# quantization at video rate: a 55 ms shift lands on the nearest whole frame
kw = dict(fs_hz=90.0, duration_s=30.0, rate_profile=constant_rate(72.0),
          harmonics=((1.0, 1.0, 0.0), (2.0, 0.3, 0.7)), noise_std=0.02)
a = synth_pulse(PulseModel(seed=4, **kw))
b = synth_pulse(PulseModel(seed=4, delay_s=0.055, **kw))
est = xcorr_lag(a, b, 0.3)
print(f"55 ms delay sampled at 90 Hz: recovered {est.lag_s*1000:.2f} ms "
      f"({est.lag_s*90:.0f} frames)")
