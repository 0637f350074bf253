"""Delay estimation by sample cross-correlation and latency bookkeeping."""

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal

from .codec import sdi_line_timing
from .errors import InvalidArgumentError, LowConfidenceError

MIN_CONFIDENCE = 0.3


@dataclass(frozen=True)
class Correlation:
    """Cross-correlation over integer lags.

    ``raw[i] = mean(x[k] * y[k + lags[i]])`` over the valid overlap, after
    mean removal; ``normalized`` divides by ``sqrt(Rxx(0) * Ryy(0))``.
    ``lag_s`` includes any difference between the records' start times.
    """

    lags: np.ndarray
    lag_s: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    sample_rate: float

    def __iter__(self):
        return iter(zip(self.lag_s.tolist(), self.normalized.tolist()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["lag_seconds", "raw", "normalized"])
            for t, r, n in zip(self.lag_s, self.raw, self.normalized):
                out.writerow([repr(float(t)), repr(float(r)), repr(float(n))])


def cross_correlate(x, y, max_lag_s):
    """Sample cross-correlation of ``y`` against ``x`` for ``|lag| <= max_lag_s``.

    A positive lag means ``y`` is late relative to ``x``. Each lag sums only
    the samples where both records exist and divides by that count.
    """
    if not math.isclose(x.sample_rate, y.sample_rate, rel_tol=1e-12):
        raise InvalidArgumentError(
            f"sample rates differ: {x.sample_rate} vs {y.sample_rate}")
    if max_lag_s < 0:
        raise InvalidArgumentError("max_lag_s must be >= 0")
    fs = x.sample_rate
    max_lag = int(math.floor(max_lag_s * fs + 1e-9))
    n, m = x.samples.size, y.samples.size
    if min(n, m) < 2 * max_lag or min(n, m) < 2:
        raise InvalidArgumentError("each record must span at least 2 * max_lag")
    xs = x.samples - x.samples.mean()
    ys = y.samples - y.samples.mean()

    full = signal.correlate(ys, xs, mode="full", method="fft")
    lags = np.arange(-max_lag, max_lag + 1)
    # full[j] pairs y[k + lag] with x[k] where lag = j - (n - 1)
    sums = full[lags + n - 1]
    overlap = np.minimum(n, m - lags) - np.maximum(0, -lags)
    raw = sums / overlap
    scale = math.sqrt(np.mean(xs * xs) * np.mean(ys * ys))
    normalized = np.clip(raw / scale, -1.0, 1.0) if scale > 0 else np.zeros_like(raw)
    lag_s = lags / fs + (y.t0 - x.t0)
    return Correlation(lags, lag_s, raw, normalized, fs)


@dataclass(frozen=True)
class DelayEstimate:
    tau_d_s: float
    correlation_peak: float
    lag_samples: float


def estimate_delay(x, y, max_lag_s, subsample=False):
    """Delay of ``y`` relative to ``x`` at the correlation maximum.

    With ``subsample`` the peak is refined by a parabola through the peak
    and its two neighbours.

    Raises
    ------
    LowConfidenceError
        When the normalized peak is below 0.3; carries the best estimate.
    """
    c = cross_correlate(x, y, max_lag_s)
    i = int(np.argmax(c.raw))
    lag = float(c.lags[i])
    if subsample and 0 < i < c.raw.size - 1:
        a, b, d = c.raw[i - 1], c.raw[i], c.raw[i + 1]
        denom = a - 2 * b + d
        if denom < 0:
            lag += 0.5 * (a - d) / denom
    tau = lag / c.sample_rate + (y.t0 - x.t0)
    peak = float(c.normalized[i])
    if peak < MIN_CONFIDENCE:
        raise LowConfidenceError(
            f"correlation peak {peak:.3f} is below {MIN_CONFIDENCE}", tau_d_s=tau,
            correlation_peak=peak)
    return DelayEstimate(tau, peak, lag)


@dataclass(frozen=True)
class LatencyReport:
    tau_d_s: float
    tau_bb_s: float
    tau_ow_s: float
    ceq_latency_s: float
    tau_sdi_s: float
    correlation_peak: float = math.nan
    window_s: float = math.nan
    n_samples: int = 0
    sources: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["sources"] = list(self.sources)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in d.items()}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def compose_latency(tau_d_s, tau_bb_s, ceq_latency_s, correlation_peak=math.nan,
                    window_s=math.nan, n_samples=0, sources=()):
    """Over-the-air and end-to-end latency from the measured terms.

    ``tau_ow = tau_d + tau_bb`` and ``tau_sdi = tau_ow + ceq_latency``;
    ``tau_d`` may be negative.
    """
    tau_ow = tau_d_s + tau_bb_s
    return LatencyReport(
        tau_d_s=tau_d_s, tau_bb_s=tau_bb_s, tau_ow_s=tau_ow,
        ceq_latency_s=ceq_latency_s, tau_sdi_s=tau_ow + ceq_latency_s,
        correlation_peak=correlation_peak, window_s=window_s,
        n_samples=int(n_samples), sources=tuple(sources))


def measure_latency(x, y, tau_bb_s, ceq_latency_s, max_lag_s, subsample=False):
    """:func:`estimate_delay` followed by :func:`compose_latency`."""
    est = estimate_delay(x, y, max_lag_s, subsample=subsample)
    n = min(x.samples.size, y.samples.size)
    return compose_latency(
        est.tau_d_s, tau_bb_s, ceq_latency_s, correlation_peak=est.correlation_peak,
        window_s=(n - 1) / x.sample_rate, n_samples=n,
        sources=("tau_d: cross-correlation estimate", "tau_bb: supplied",
                 "ceq_latency: supplied"))


def conversion_delay_estimate(frame_rate, lines_per_frame, line_count_range):
    """Delay range of a converter that buffers a few video lines.

    Returns ``[lo, hi] * line_duration`` in seconds.
    """
    lo, hi = line_count_range
    if not 0 <= lo <= hi:
        raise InvalidArgumentError(f"invalid line range {line_count_range!r}")
    line = sdi_line_timing(frame_rate, lines_per_frame).line_duration
    return [lo * line, hi * line]
