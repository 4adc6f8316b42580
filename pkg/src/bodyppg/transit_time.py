"""Differential pulse-transit-time estimation between body-site waveforms.

Pulse waves arrive at different body sites with small time offsets. Pairwise
offsets are estimated per sliding window by a normalized cross-correlation
scan over integer-sample lags, assembled into a skew-symmetric site-by-site
matrix, and summarized with boxplot statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .signals import Waveform, WindowPlan, windows

__all__ = [
    "LagEstimate",
    "PTTMatrix",
    "LagStats",
    "xcorr_lag",
    "ptt_matrix",
    "phase_angle_deg",
    "lag_distribution_stats",
    "DEFAULT_PTT_PLAN",
    "DEFAULT_MAX_LAG_S",
    "DEFAULT_MIN_PEAK_CORR",
]

DEFAULT_PTT_PLAN = WindowPlan(length_s=5.0, stride_s=0.010)
DEFAULT_MAX_LAG_S = 0.300
# Waveform pairs correlating below this in a window are too unreliable for a
# lag estimate and are excluded from aggregation (counts are reported).
DEFAULT_MIN_PEAK_CORR = 0.5


@dataclass(frozen=True)
class LagEstimate:
    """One pairwise lag: positive means the first signal leads the second."""

    lag_s: float
    peak_corr: float
    window_center_time_s: float = 0.0


@dataclass(frozen=True)
class PTTMatrix:
    """Pairwise lag matrices over named sites.

    ``mean_lag_s`` is exactly skew-symmetric with a zero diagonal: each
    unordered pair is estimated once and mirrored with negation.
    ``per_window_lag_s`` keeps every retained window estimate (NaN where a
    window was excluded) for distribution statistics.
    """

    sites: tuple[str, ...]
    mean_lag_s: np.ndarray
    per_window_lag_s: np.ndarray
    window_times_s: np.ndarray
    peak_corr: np.ndarray
    n_excluded_low_corr: np.ndarray
    n_failed: np.ndarray
    min_peak_corr: float

    def site_index(self, site: str) -> int:
        try:
            return self.sites.index(site)
        except ValueError:
            raise KeyError(f"unknown site {site!r}; known sites: {list(self.sites)}") from None

    def pair_lags_s(self, site_a: str, site_b: str) -> np.ndarray:
        """Retained per-window lags for one ordered pair, NaNs dropped."""
        i, j = self.site_index(site_a), self.site_index(site_b)
        lags = self.per_window_lag_s[:, i, j]
        return lags[np.isfinite(lags)]

    def to_dict(self) -> dict:
        return {
            "sites": list(self.sites),
            "mean_lag_ms": (self.mean_lag_s * 1000.0).tolist(),
            "peak_corr": self.peak_corr.tolist(),
            "n_windows": int(self.per_window_lag_s.shape[0]),
            "n_excluded_low_corr": self.n_excluded_low_corr.tolist(),
            "n_failed": self.n_failed.tolist(),
            "min_peak_corr": self.min_peak_corr,
        }


@dataclass(frozen=True)
class LagStats:
    """Tukey five-number summary of per-window lags for one site pair."""

    median_s: float
    q1_s: float
    q3_s: float
    whisker_low_s: float
    whisker_high_s: float
    outliers_s: tuple[float, ...]
    n_windows: int


def _pearson_all_lags(x: np.ndarray, y: np.ndarray, max_lag: int) -> np.ndarray:
    """Pearson correlation of the overlap of x and y at every integer lag.

    Index k + max_lag holds the correlation between ``x[:n-k]`` and ``y[k:]``
    (k >= 0) or ``x[-k:]`` and ``y[:n+k]`` (k < 0). Lags whose overlap has
    zero variance on either side come back as -inf.

    Equivalent to a per-lag brute-force scan; the overlap sums are assembled
    from one cross-correlation pass plus prefix sums.
    """
    n = x.size
    # Pearson is invariant to shifting and scaling each input as a whole;
    # conditioning the prefix-sum variance arithmetic this way keeps the
    # cancellation error negligible.
    xs = (x - x.mean()) / (x.std() or 1.0)
    ys = (y - y.mean()) / (y.std() or 1.0)

    ks = np.arange(-max_lag, max_lag + 1)
    m = (n - np.abs(ks)).astype(np.float64)

    # sum over the overlap of xs[i] * ys[i + k]: full cross-correlation
    # evaluated at lag -k.
    full = sps.correlate(xs, ys, mode="full")
    sxy = full[n - 1 - ks]

    cum_x = np.concatenate([[0.0], np.cumsum(xs)])
    cum_x2 = np.concatenate([[0.0], np.cumsum(xs * xs)])
    cum_y = np.concatenate([[0.0], np.cumsum(ys)])
    cum_y2 = np.concatenate([[0.0], np.cumsum(ys * ys)])

    pos = ks >= 0
    mi = m.astype(int)
    sx = np.where(pos, cum_x[mi], cum_x[n] - cum_x[np.abs(ks)])
    sx2 = np.where(pos, cum_x2[mi], cum_x2[n] - cum_x2[np.abs(ks)])
    sy = np.where(pos, cum_y[n] - cum_y[np.abs(ks)], cum_y[mi])
    sy2 = np.where(pos, cum_y2[n] - cum_y2[np.abs(ks)], cum_y2[mi])

    var_x = sx2 - sx * sx / m
    var_y = sy2 - sy * sy / m
    cov = sxy - sx * sy / m
    eps = 1e-12 * m
    valid = (var_x > eps) & (var_y > eps)
    corr = np.full(ks.size, -np.inf)
    corr[valid] = cov[valid] / np.sqrt(var_x[valid] * var_y[valid])
    return corr


def _best_lag(
    x: np.ndarray, y: np.ndarray, max_lag: int, subsample: bool
) -> tuple[float, float]:
    """Lag (in samples) and peak correlation; ties go to the smaller |k|."""
    corr = _pearson_all_lags(x, y, max_lag)
    if not np.any(np.isfinite(corr)):
        raise ValueError("zero variance in every tested overlap; no lag defined")
    ks = np.arange(-max_lag, max_lag + 1)
    order = np.lexsort((ks, np.abs(ks)))
    best = order[int(np.argmax(corr[order]))]
    k = int(ks[best])
    peak = float(np.clip(corr[best], -1.0, 1.0))

    lag = float(k)
    if subsample and -max_lag < k < max_lag:
        c_lo, c_mid, c_hi = corr[best - 1], corr[best], corr[best + 1]
        if np.isfinite(c_lo) and np.isfinite(c_hi):
            denom = c_lo - 2.0 * c_mid + c_hi
            if denom < 0.0:
                lag += 0.5 * (c_lo - c_hi) / denom
    return lag, peak


def xcorr_lag(
    x: Waveform, y: Waveform, max_lag_s: float, subsample: bool = False
) -> LagEstimate:
    """Best integer-sample lag between two waveforms by correlation scan.

    For every integer lag k in [-L, L] the Pearson correlation between the
    overlapping parts of x and y (y shifted by k) is evaluated; the lag with
    the maximum correlation wins, ties going to the smaller |k|. A positive
    result means x leads y. With ``subsample`` a parabolic fit around the peak
    refines the lag below one sample (off by default; integer-sample
    resolution is the documented behavior).

    Raises:
        ValueError: on mismatched rates/lengths, a max lag of at least half
            the duration, or zero variance at every tested alignment.
    """
    if abs(x.sample_rate_hz - y.sample_rate_hz) > 1e-9 * x.sample_rate_hz:
        raise ValueError("waveforms must share a sample rate")
    if len(x) != len(y):
        raise ValueError(f"waveforms must have equal length, got {len(x)} and {len(y)}")
    fs = x.sample_rate_hz
    if not 0 < max_lag_s < x.duration_s / 2.0:
        raise ValueError(
            f"max_lag_s must sit in (0, {x.duration_s / 2.0:g}) s, got {max_lag_s}"
        )
    lag_samples, peak = _best_lag(
        x.samples, y.samples, int(round(max_lag_s * fs)), subsample
    )
    return LagEstimate(
        lag_s=lag_samples / fs,
        peak_corr=peak,
        window_center_time_s=x.start_time_s + x.duration_s / 2.0,
    )


def ptt_matrix(
    waves: list[tuple[str, Waveform]],
    plan: WindowPlan | None = None,
    max_lag_s: float = DEFAULT_MAX_LAG_S,
    min_peak_corr: float = DEFAULT_MIN_PEAK_CORR,
    subsample: bool = False,
) -> PTTMatrix:
    """Pairwise transit-time matrix over sliding windows.

    Each unordered site pair is estimated once per window and mirrored with
    negation, so every per-window matrix and the mean matrix are exactly
    skew-symmetric. Windows whose peak correlation falls below
    ``min_peak_corr``, or where a pair has zero variance, are dropped for that
    pair only, with counts reported.
    """
    if plan is None:
        plan = DEFAULT_PTT_PLAN
    if len(waves) < 2:
        raise ValueError("need at least two sites for a transit-time matrix")
    sites = tuple(site for site, _ in waves)
    if len(set(sites)) != len(sites):
        raise ValueError("site names must be unique")
    fs = waves[0][1].sample_rate_hz
    n = len(waves[0][1])
    for site, wave in waves:
        if abs(wave.sample_rate_hz - fs) > 1e-9 * fs:
            raise ValueError(f"site {site!r} has a different sample rate")
        if len(wave) != n:
            raise ValueError(f"site {site!r} has a different length")
    if not 0 < max_lag_s < plan.length_s / 2.0:
        raise ValueError(f"max_lag_s {max_lag_s} must sit in (0, {plan.length_s / 2.0}) s")

    spans = windows(waves[0][1], plan)
    max_lag = int(round(max_lag_s * fs))
    n_sites = len(sites)
    n_windows = len(spans)
    arrays = [wave.samples for _, wave in waves]

    per_window = np.full((n_windows, n_sites, n_sites), np.nan)
    corr_sum = np.zeros((n_sites, n_sites))
    corr_count = np.zeros((n_sites, n_sites), dtype=int)
    n_excluded = np.zeros((n_sites, n_sites), dtype=int)
    n_failed = np.zeros((n_sites, n_sites), dtype=int)
    times = np.empty(n_windows)

    n_len = len(spans[0][1]) if spans else 0
    for widx, (start, first_seg) in enumerate(spans):
        times[widx] = first_seg.start_time_s + plan.length_s / 2.0
        per_window[widx][np.diag_indices(n_sites)] = 0.0
        segs = [arr[start : start + n_len] for arr in arrays]
        for i in range(n_sites):
            for j in range(i + 1, n_sites):
                try:
                    lag_samples, peak = _best_lag(segs[i], segs[j], max_lag, subsample)
                except ValueError:
                    n_failed[i, j] += 1
                    n_failed[j, i] += 1
                    continue
                if peak < min_peak_corr:
                    n_excluded[i, j] += 1
                    n_excluded[j, i] += 1
                    continue
                lag_s = lag_samples / fs
                per_window[widx, i, j] = lag_s
                per_window[widx, j, i] = -lag_s
                corr_sum[i, j] += peak
                corr_sum[j, i] += peak
                corr_count[i, j] += 1
                corr_count[j, i] += 1

    mean_lag = np.zeros((n_sites, n_sites))
    mean_corr = np.eye(n_sites)
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            lags = per_window[:, i, j]
            lags = lags[np.isfinite(lags)]
            if lags.size:
                m = float(np.mean(lags))
                mean_lag[i, j] = m
                mean_lag[j, i] = -m
                mean_corr[i, j] = mean_corr[j, i] = corr_sum[i, j] / corr_count[i, j]
            else:
                mean_corr[i, j] = mean_corr[j, i] = np.nan

    return PTTMatrix(
        sites=sites,
        mean_lag_s=mean_lag,
        per_window_lag_s=per_window,
        window_times_s=times,
        peak_corr=mean_corr,
        n_excluded_low_corr=n_excluded,
        n_failed=n_failed,
        min_peak_corr=min_peak_corr,
    )


def phase_angle_deg(lag_s: float, rate_bpm: float) -> float:
    """Phase angle of a time lag at a given pulse rate, in degrees.

    A lag of one full period (60 / rate_bpm seconds) maps to 360 degrees.
    """
    if not rate_bpm > 0:
        raise ValueError(f"rate_bpm must be positive, got {rate_bpm}")
    return 360.0 * lag_s * rate_bpm / 60.0


def lag_distribution_stats(m: PTTMatrix, pair: tuple[str, str]) -> LagStats:
    """Tukey boxplot summary of per-window lags for one site pair.

    Whiskers extend to the most extreme values within 1.5 interquartile ranges
    of the quartiles; values beyond are listed as outliers.

    Raises:
        ValueError: with fewer than five retained window estimates.
    """
    lags = m.pair_lags_s(pair[0], pair[1])
    if lags.size < 5:
        raise ValueError(
            f"pair {pair} has only {lags.size} retained windows; need at least 5"
        )
    q1, med, q3 = np.percentile(lags, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_limit = q1 - 1.5 * iqr
    hi_limit = q3 + 1.5 * iqr
    inside = lags[(lags >= lo_limit) & (lags <= hi_limit)]
    outliers = lags[(lags < lo_limit) | (lags > hi_limit)]
    return LagStats(
        median_s=float(med),
        q1_s=float(q1),
        q3_s=float(q3),
        whisker_low_s=float(inside.min()),
        whisker_high_s=float(inside.max()),
        outliers_s=tuple(sorted(outliers.tolist())),
        n_windows=int(lags.size),
    )
