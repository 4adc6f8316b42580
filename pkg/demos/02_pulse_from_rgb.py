"""Extract a pulse from synthetic RGB skin traces with CHROM and POS.

The generator injects a known pulse along an unequal per-channel direction
(green strongest, as blood absorption dictates), plus achromatic motion
bursts that hit all channels equally. Both methods should recover the pulse
and ignore the bursts.
"""

import numpy as np

from bodyppg import chrom, pos, stft_pulse_rate, mae, pearson_r
from bodyppg.pulse_rate import PulseRateSeries
from bodyppg.synth import Burst, PulseModel, ramp_rate, synth_pulse, synth_rgb_trace

fs = 90.0
profile = ramp_rate(65.0, 80.0, 60.0)
pulse = synth_pulse(
    PulseModel(
        fs_hz=fs,
        duration_s=60.0,
        rate_profile=profile,
        harmonics=((1.0, 1.0, 0.0), (2.0, 0.3, 1.1)),
        seed=1,
    )
)

trace = synth_rgb_trace(
    pulse,
    baseline=(0.66, 0.50, 0.42),
    modulation=(0.002, 0.006, 0.004),
    noise_std=0.0008,
    motion_bursts=[Burst(20.0, 24.0, 0.04)],
    seed=2,
)
print(f"trace: {trace.duration_s:.0f} s at {fs:.0f} Hz, channels peak around "
      f"{trace.channel_matrix().max():.2f}")

for name, method in (("CHROM", chrom), ("POS", pos)):
    out = method(trace)
    r_wave = np.corrcoef(out.samples, pulse.samples)[0, 1]
    rates = stft_pulse_rate(out)
    truth = PulseRateSeries(rates.times_s, profile(rates.times_s),
                            rates.window_length_s, rates.band_bpm)
    print(f"{name}: waveform r = {r_wave:.3f}, "
          f"rate MAE = {mae(rates, truth):.2f} bpm, "
          f"rate r = {pearson_r(rates, truth):.3f} over {len(rates)} windows")

# the same trace with equal-channel modulation only: nothing to recover
flat = synth_rgb_trace(pulse, baseline=(0.66, 0.50, 0.42),
                       modulation=(0.004, 0.004, 0.004), seed=3)
print("achromatic-only trace, POS output power:",
      float(np.max(np.abs(pos(flat).samples))))
