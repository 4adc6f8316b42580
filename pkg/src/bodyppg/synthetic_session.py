"""Generate a complete synthetic recording session on disk.

Produces everything a real capture would: nine contact-sensor CSVs with
per-site pulse arrival delays, a fingertip oximeter CSV, per-region RGB trace
CSVs carrying a chromatic pulse, grid cell means for one region, pose
keypoints, and a manifest tying it together. Entirely deterministic per seed,
so end-to-end pipeline runs are reproducible and checkable against the
generator's ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import PoseKeypoints
from .session import (
    write_grid,
    write_poses_json,
    write_trace_csv,
)
from .signals import Waveform
from .synth import (
    Burst,
    PulseModel,
    motion_burst_noise,
    ramp_rate,
    synth_pulse,
    synth_rgb_trace,
)

__all__ = ["SyntheticSessionConfig", "build_synthetic_session"]

_FLOAT_FMT = "%.12g"

# Pulse arrival delay per contact-sensor site, seconds. All values are exact
# multiples of the 400 Hz sample period so correlation scans can recover them
# exactly.
SENSOR_DELAYS_S = {
    "neck": 0.0000,
    "right-arm-upper": 0.0100,
    "left-arm-upper": 0.0125,
    "right-arm-lower": 0.0200,
    "left-arm-lower": 0.0225,
    "right-leg-upper": 0.0300,
    "left-leg-upper": 0.0325,
    "right-leg-lower": 0.0475,
    "left-leg-lower": 0.0500,
}

ROI_DELAYS_S = {
    "face": 0.0000,
    "palm": 1.0 / 90.0,
    "right-arm": 2.0 / 90.0,
    "left-arm": 2.0 / 90.0,
    "right-leg": 4.0 / 90.0,
    "left-leg": 4.0 / 90.0,
}

ROI_BASELINES = {
    "face": (0.66, 0.50, 0.42),
    "palm": (0.70, 0.55, 0.47),
    "right-arm": (0.60, 0.46, 0.38),
    "left-arm": (0.60, 0.46, 0.38),
    "right-leg": (0.55, 0.42, 0.35),
    "left-leg": (0.55, 0.42, 0.35),
}

DEFAULT_MODULATION = (0.002, 0.006, 0.004)

POSE_POINT_NAMES = (
    "nose",
    "left-shoulder",
    "right-shoulder",
    "left-elbow",
    "right-elbow",
    "left-hip",
    "right-hip",
    "left-knee",
    "right-knee",
    "left-ankle",
    "right-ankle",
)

POSE_BASE_XY = np.array(
    [
        [160.0, 40.0],
        [120.0, 80.0],
        [200.0, 80.0],
        [100.0, 130.0],
        [220.0, 130.0],
        [130.0, 160.0],
        [190.0, 160.0],
        [125.0, 210.0],
        [195.0, 210.0],
        [120.0, 260.0],
        [200.0, 260.0],
    ]
)


@dataclass(frozen=True)
class SyntheticSessionConfig:
    """Knobs for the generated session."""

    seed: int = 7
    duration_s: float = 60.0
    video_fps: float = 90.0
    sensor_rate_hz: float = 400.0
    oximeter_rate_hz: float = 60.0
    rate_start_bpm: float = 66.0
    rate_end_bpm: float = 78.0
    sensor_noise_std: float = 0.08
    trace_noise_std: float = 0.0008
    grid_roi: str = "face"
    grid_rows: int = 3
    grid_cols: int = 4
    grid_cell_px: int = 20
    corrupt_sites: tuple[str, ...] = ()
    burst_span_s: tuple[float, float] = (2.0, 5.0)
    burst_amplitude: float = 8.0
    harmonics: tuple[tuple[float, float, float], ...] = (
        (1.0, 1.0, 0.0),
        (2.0, 0.30, 1.1),
        (3.0, 0.12, 2.3),
    )

    def rate_profile(self):
        return ramp_rate(self.rate_start_bpm, self.rate_end_bpm, self.duration_s)


def _write_sensor_csv(path: Path, t: np.ndarray, red: np.ndarray, ir: np.ndarray) -> None:
    out = np.column_stack([t, red, ir])
    np.savetxt(path, out, delimiter=",", header="time_s,red,ir", comments="", fmt=_FLOAT_FMT)


def _write_oximeter_csv(path: Path, t: np.ndarray, bpm: np.ndarray) -> None:
    out = np.column_stack([t, bpm, np.full_like(t, 98.0)])
    np.savetxt(path, out, delimiter=",", header="time_s,bpm,spo2", comments="", fmt=_FLOAT_FMT)


def build_synthetic_session(
    out_dir: Path | str, cfg: SyntheticSessionConfig | None = None
) -> Path:
    """Write a full synthetic session into ``out_dir``; returns the manifest path.

    A ``ground_truth.json`` sidecar records the generator's own answers
    (rate profile endpoints, per-site delays) for downstream verification; the
    analysis pipeline never reads it.
    """
    if cfg is None:
        cfg = SyntheticSessionConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profile = cfg.rate_profile()

    # Contact sensors at 400 Hz, one pulse model per site with its own noise.
    sensor_entries = []
    for i, (site, delay) in enumerate(sorted(SENSOR_DELAYS_S.items())):
        model = PulseModel(
            fs_hz=cfg.sensor_rate_hz,
            duration_s=cfg.duration_s,
            rate_profile=profile,
            harmonics=cfg.harmonics,
            delay_s=delay,
            noise_std=cfg.sensor_noise_std,
            seed=cfg.seed * 1000 + i,
        )
        pulse = synth_pulse(model).samples
        if site in cfg.corrupt_sites:
            pulse = pulse + motion_burst_noise(
                cfg.sensor_rate_hz,
                cfg.duration_s,
                [Burst(cfg.burst_span_s[0], cfg.burst_span_s[1], cfg.burst_amplitude)],
                seed=cfg.seed * 2000 + i,
            )
        t = np.arange(pulse.size) / cfg.sensor_rate_hz
        ir = 5000.0 + 80.0 * pulse
        red = 4000.0 + 50.0 * pulse
        path = out_dir / f"sensor_{site}.csv"
        _write_sensor_csv(path, t, red, ir)
        sensor_entries.append({"site": site, "path": path.name, "channel": "ir"})

    # Oximeter rate stream at 60 Hz with slow jitter around the true profile.
    n_ox = int(round(cfg.duration_s * cfg.oximeter_rate_hz))
    t_ox = np.arange(n_ox) / cfg.oximeter_rate_hz
    rng = np.random.default_rng(cfg.seed + 17)
    jitter = np.interp(
        t_ox,
        np.linspace(0.0, cfg.duration_s, 13),
        rng.normal(0.0, 0.8, 13),
    )
    _write_oximeter_csv(out_dir / "oximeter.csv", t_ox, profile(t_ox) + jitter)

    # Per-region RGB traces at video rate.
    trace_entries = {}
    for i, (roi, delay) in enumerate(sorted(ROI_DELAYS_S.items())):
        model = PulseModel(
            fs_hz=cfg.video_fps,
            duration_s=cfg.duration_s,
            rate_profile=profile,
            harmonics=cfg.harmonics,
            delay_s=delay,
            noise_std=0.0,
            seed=cfg.seed * 3000 + i,
        )
        pulse = synth_pulse(model)
        trace = synth_rgb_trace(
            pulse,
            baseline=ROI_BASELINES[roi],
            modulation=DEFAULT_MODULATION,
            noise_std=cfg.trace_noise_std,
            seed=cfg.seed * 4000 + i,
            roi_label=roi,
        )
        path = out_dir / f"trace_{roi}.csv"
        write_trace_csv(path, trace)
        trace_entries[roi] = path.name

    # Grid cell means for one region: every cell carries the region's pulse
    # with per-cell noise; one corner cell is mostly background.
    grid_model = PulseModel(
        fs_hz=cfg.video_fps,
        duration_s=cfg.duration_s,
        rate_profile=profile,
        harmonics=cfg.harmonics,
        delay_s=ROI_DELAYS_S[cfg.grid_roi],
        seed=cfg.seed * 5000,
    )
    grid_pulse = synth_pulse(grid_model)
    n_frames = len(grid_pulse)
    values = np.empty((n_frames, cfg.grid_rows, cfg.grid_cols, 3))
    rng = np.random.default_rng(cfg.seed + 29)
    base = ROI_BASELINES[cfg.grid_roi]
    for row in range(cfg.grid_rows):
        for col in range(cfg.grid_cols):
            for c in range(3):
                values[:, row, col, c] = base[c] * (
                    1.0 + DEFAULT_MODULATION[c] * grid_pulse.samples
                ) + rng.normal(0.0, cfg.trace_noise_std, n_frames)
    fraction = np.ones((cfg.grid_rows, cfg.grid_cols))
    fraction[-1, -1] = 0.3
    from .grid import SubregionGrid

    grid = SubregionGrid(
        values=values,
        sample_rate_hz=cfg.video_fps,
        start_time_s=0.0,
        origin_px=(120, 40),
        cell_px=cfg.grid_cell_px,
        skin_fraction=fraction,
    )
    write_grid(out_dir / "grid_face.csv", out_dir / "grid_face.json", grid)

    # One pose per 10-second window, jittered around a fixed skeleton.
    rng = np.random.default_rng(cfg.seed + 41)
    poses = []
    for widx in range(int(cfg.duration_s // 10)):
        xy = POSE_BASE_XY + rng.normal(0.0, 2.0, POSE_BASE_XY.shape)
        vis = np.full(len(POSE_POINT_NAMES), 0.95)
        poses.append(
            PoseKeypoints(
                names=POSE_POINT_NAMES,
                xy=xy,
                visibility=vis,
                frame_time_s=widx * 10.0 + 5.0,
            )
        )
    write_poses_json(out_dir / "poses.json", poses)

    manifest = {
        "session_id": f"synthetic-{cfg.seed}",
        "video": {
            "fps": cfg.video_fps,
            "width": 320,
            "height": 320,
            "traces": trace_entries,
            "grids": {
                cfg.grid_roi: {"means": "grid_face.csv", "meta": "grid_face.json"}
            },
        },
        "sensors": sensor_entries,
        "oximeter": {"path": "oximeter.csv", "rate_hz": cfg.oximeter_rate_hz},
        "rois": [{"label": roi, "bbox": [0, 0, 320, 320]} for roi in sorted(ROI_DELAYS_S)],
        "keypoints": "poses.json",
        "portions": [{"name": "relaxed", "start_s": 0.0, "end_s": cfg.duration_s}],
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    truth = {
        "rate_start_bpm": cfg.rate_start_bpm,
        "rate_end_bpm": cfg.rate_end_bpm,
        "duration_s": cfg.duration_s,
        "sensor_delays_s": dict(sorted(SENSOR_DELAYS_S.items())),
        "roi_delays_s": dict(sorted(ROI_DELAYS_S.items())),
        "corrupt_sites": list(cfg.corrupt_sites),
        "seed": cfg.seed,
    }
    with open(out_dir / "ground_truth.json", "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
