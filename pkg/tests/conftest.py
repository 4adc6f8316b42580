import numpy as np
import pytest

from bodyppg import PulseRateSeries, Waveform
from bodyppg.synth import PulseModel, constant_rate, synth_pulse


@pytest.fixture
def tone_90hz():
    """Unit 1.2 Hz (72 bpm) sine, 60 s at 90 Hz."""
    t = np.arange(int(60 * 90)) / 90.0
    return Waveform(np.sin(2 * np.pi * 1.2 * t), 90.0)


@pytest.fixture
def pulse_72():
    """Synthetic 72 bpm pulse with harmonics, 60 s at 90 Hz."""
    model = PulseModel(
        fs_hz=90.0,
        duration_s=60.0,
        rate_profile=constant_rate(72.0),
        harmonics=((1.0, 1.0, 0.0), (2.0, 0.3, 1.1)),
        seed=1,
    )
    return synth_pulse(model)


def flat_rate_series(bpm, duration_s, window_length_s=10.0, stride_s=1.0):
    times = np.arange(window_length_s / 2.0, duration_s - window_length_s / 2.0 + 1e-9, stride_s)
    return PulseRateSeries(times, np.full(times.size, bpm), window_length_s, (40.0, 180.0))
