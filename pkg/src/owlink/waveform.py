"""Sampled analog signals and SDI pulse synthesis.

A :class:`Waveform` is the container passed between every stage of the link
model. :func:`synthesize` turns an NRZ level sequence into a waveform with
raised-cosine edges whose 20-80 % durations match the requested rise and fall
times, optionally followed by a damped ring for overshoot.
"""

import csv
import struct
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy import signal

from .errors import InvalidArgumentError

DEFAULT_SAMPLE_RATE = 32e9

UNITS = ("V", "A", "W")

# 20 %-80 % span of 0.5 * (1 - cos(pi * s)), s in [0, 1]
_RC_20_80 = (np.arccos(-0.6) - np.arccos(0.6)) / np.pi
# fraction of the edge duration below the 80 % point
_RC_80 = np.arccos(-0.6) / np.pi

_RING_DECAY = 2.0
_RING_PEAK_U = np.arctan(2 * np.pi / _RING_DECAY) / (2 * np.pi)
_RING_NORM = np.sin(2 * np.pi * _RING_PEAK_U) * np.exp(-_RING_DECAY * _RING_PEAK_U)


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real signal.

    Parameters
    ----------
    samples : array_like
        Sample values (float64).
    sample_rate : float
        Samples per second.
    t0 : float
        Time of the first sample in seconds.
    unit : {"V", "A", "W"}
        Physical unit. Optical power (``"W"``) must be non-negative.
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0
    unit: str = "V"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise InvalidArgumentError("samples must be a nonempty 1-D array")
        if not self.sample_rate > 0:
            raise InvalidArgumentError("sample_rate must be positive")
        if self.unit not in UNITS:
            raise InvalidArgumentError(f"unit must be one of {UNITS}, got {self.unit!r}")
        if self.unit == "W" and x.min() < 0:
            raise InvalidArgumentError("optical power samples must be non-negative")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self):
        return int(self.samples.size)

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def times(self):
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples, unit=None):
        return replace(self, samples=samples, unit=unit or self.unit)

    def scaled(self, gain):
        return self.with_samples(self.samples * gain)

    def delayed(self, delay_s):
        """Same samples, time axis shifted by ``delay_s``."""
        return replace(self, t0=self.t0 + delay_s)

    def identical(self, other):
        """Bitwise equality of samples and metadata."""
        return (self.sample_rate == other.sample_rate and self.t0 == other.t0
                and self.unit == other.unit
                and self.samples.tobytes() == other.samples.tobytes())


@dataclass(frozen=True)
class PulseSpec:
    """NRZ pulse parameters.

    ``t_rise`` and ``t_fall`` are 20-80 % times; zero gives ideal steps.
    ``overshoot_frac`` is the ring peak relative to half the swing.
    """

    ui: float
    vpp: float = 0.8
    dc_offset: float = 0.0
    t_rise: float = 100e-12
    t_fall: float = 100e-12
    overshoot_frac: float = 0.0

    def __post_init__(self):
        if not self.ui > 0:
            raise InvalidArgumentError("ui must be positive")
        if not self.vpp > 0:
            raise InvalidArgumentError("vpp must be positive")
        if not (0 <= self.t_rise < self.ui and 0 <= self.t_fall < self.ui):
            raise InvalidArgumentError("rise/fall times must lie in [0, ui)")
        if self.overshoot_frac < 0:
            raise InvalidArgumentError("overshoot_frac must be >= 0")

    @classmethod
    def nominal(cls, bit_rate, vpp=0.8, dc_offset=0.0, edge_frac=0.3, overshoot_frac=0.0):
        """Clean SDI-like pulse at ``bit_rate`` with edges of ``edge_frac`` UI."""
        ui = 1.0 / bit_rate
        return cls(ui=ui, vpp=vpp, dc_offset=dc_offset, t_rise=edge_frac * ui,
                   t_fall=edge_frac * ui, overshoot_frac=overshoot_frac)

    @property
    def bit_rate(self):
        return 1.0 / self.ui


def _edge_shape(s):
    return 0.5 * (1.0 - np.cos(np.pi * s))


def _ring_shape(u):
    return np.sin(2 * np.pi * u) * np.exp(-_RING_DECAY * u) / _RING_NORM


def _scatter_terms(n_samples, starts, width, fn):
    """Sum per-edge finite-support terms into a length-``n_samples`` array.

    ``starts`` holds each term's first sample index; ``fn(rows, cols)``
    returns the term value at sample ``starts[rows] + cols`` (NaN outside
    its support).
    """
    if starts.size == 0 or width <= 0:
        return np.zeros(n_samples)
    out = np.zeros(n_samples)
    chunk = max(1, 2_000_000 // width)
    cols = np.arange(width)
    for lo in range(0, starts.size, chunk):
        rows = np.arange(lo, min(lo + chunk, starts.size))
        idx = starts[rows, None] + cols[None, :]
        vals = fn(rows[:, None], idx)
        ok = (idx >= 0) & (idx < n_samples) & np.isfinite(vals)
        out += np.bincount(idx[ok], weights=vals[ok], minlength=n_samples)
    return out


def synthesize(levels, spec, sample_rate=DEFAULT_SAMPLE_RATE, *, t0=0.0, delay_s=0.0):
    """Render a -1/+1 level sequence as a voltage waveform.

    Level ``k`` occupies ``[t0 + delay_s + k*ui, t0 + delay_s + (k+1)*ui)``
    and maps to ``dc_offset + level * vpp/2``. Each transition is a
    raised-cosine edge centred on the UI boundary; the first level is held
    from the start of the record. Samples away from edges and rings are exact.
    """
    levels = np.asarray(levels)
    if levels.size == 0:
        raise InvalidArgumentError("levels must be nonempty")
    if not np.all((levels == 1) | (levels == -1)):
        raise InvalidArgumentError("levels must be -1 or +1")
    if sample_rate * spec.ui < 4:
        raise InvalidArgumentError(
            f"sample_rate {sample_rate:g} gives {sample_rate * spec.ui:.2f} samples/UI; need >= 4")

    ui = spec.ui
    half = spec.vpp / 2.0
    lv = levels.astype(np.float64)
    n_samples = int(round(lv.size * ui * sample_rate))
    t = np.arange(n_samples) / sample_rate - delay_s  # time relative to level 0 start

    k = np.clip(np.floor(t / ui).astype(np.int64), 0, lv.size - 1)
    out = lv[k]

    step = np.diff(lv)
    edge_k = np.flatnonzero(step) + 1  # boundary index between level k-1 and k
    if edge_k.size:
        d = step[edge_k - 1]
        tb = edge_k * ui
        rising = d > 0
        t_edge = np.where(rising, spec.t_rise, spec.t_fall) / _RC_20_80
        t_opp = np.where(rising, spec.t_fall, spec.t_rise) / _RC_20_80

        def edge_term(r, idx):
            tn = idx / sample_rate - delay_s
            te = t_edge[r]
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                s = (tn - (tb[r] - te / 2)) / te
            inside = (s >= 0) & (s <= 1)
            shape = np.where(inside, _edge_shape(np.clip(s, 0, 1)), np.nan)
            return d[r] * (shape - (tn >= tb[r]))

        if t_edge.max() > 0:
            start = np.floor(((tb - t_edge / 2) + delay_s) * sample_rate).astype(np.int64)
            width = int(np.ceil(t_edge.max() * sample_rate)) + 2
            out = out + _scatter_terms(n_samples, start, width, edge_term)

        if spec.overshoot_frac > 0:
            # ring dies out 1.5 samples before the following edge reaches its
            # first 20-80 % threshold, keeping that crossing clean
            t_ring = ui - t_edge / 2 - (1 - _RC_80) * t_opp - 1.5 / sample_rate
            t_ring = np.maximum(t_ring, 2.0 / sample_rate)

            def ring_term(r, idx):
                tn = idx / sample_rate - delay_s
                u = (tn - (tb[r] + t_edge[r] / 2)) / t_ring[r]
                inside = (u >= 0) & (u <= 1)
                shape = np.where(inside, _ring_shape(np.clip(u, 0, 1)), np.nan)
                return 0.5 * d[r] * spec.overshoot_frac * shape

            start = np.floor((tb + t_edge / 2 + delay_s) * sample_rate).astype(np.int64)
            width = int(np.ceil(t_ring.max() * sample_rate)) + 2
            out = out + _scatter_terms(n_samples, start, width, ring_term)

    return Waveform(spec.dc_offset + half * out, sample_rate, t0=t0, unit="V")


def add_dc_bias(w, v_dc):
    """Shift every sample by ``v_dc`` volts (bias-tee DC port)."""
    return w.with_samples(w.samples + v_dc)


def _resample_filter(up, down, ripple_db=70.0):
    m = max(up, down)
    # flat to 0.9 of the lower Nyquist, stopband from its Nyquist
    numtaps, beta = signal.kaiserord(ripple_db, 0.1 / m)
    numtaps |= 1
    return signal.firwin(numtaps, 0.95 / m, window=("kaiser", beta))


def resample(w, new_rate, max_denominator=4000):
    """Band-limited rate conversion by polyphase filtering.

    The rate ratio is approximated by a fraction with denominator at most
    ``max_denominator``; the returned waveform carries the rate actually
    achieved.
    """
    if not new_rate > 0:
        raise InvalidArgumentError("new_rate must be positive")
    if new_rate == w.sample_rate:
        return replace(w, samples=w.samples.copy())
    ratio = Fraction(new_rate / w.sample_rate).limit_denominator(max_denominator)
    up, down = ratio.numerator, ratio.denominator
    h = _resample_filter(up, down)
    # equal DC gain in every polyphase branch keeps constants exact
    for p in range(up):
        h[p::up] /= h[p::up].sum() * up
    y = signal.resample_poly(w.samples, up, down, window=h, padtype="line")
    if w.unit == "W":
        y = np.maximum(y, 0.0)
    return replace(w, samples=y, sample_rate=w.sample_rate * up / down)


# --- file formats -----------------------------------------------------------

WAVE_MAGIC = b"OWLWAV1\x00"
_WAVE_HEADER = struct.Struct("<8sIddQ")


def write_waveform(path, w):
    """OWLWAV1: magic, u32 unit tag, f64 rate, f64 t0, u64 count, f64 samples (LE)."""
    with open(path, "wb") as fh:
        fh.write(_WAVE_HEADER.pack(WAVE_MAGIC, UNITS.index(w.unit), w.sample_rate, w.t0,
                                   w.samples.size))
        fh.write(w.samples.astype("<f8").tobytes())


def read_waveform(path):
    with open(path, "rb") as fh:
        header = fh.read(_WAVE_HEADER.size)
        if len(header) < _WAVE_HEADER.size:
            raise InvalidArgumentError(f"{path}: truncated OWLWAV1 header")
        magic, unit, rate, t0, count = _WAVE_HEADER.unpack(header)
        if magic != WAVE_MAGIC:
            raise InvalidArgumentError(f"{path}: bad magic {magic!r}")
        if unit >= len(UNITS):
            raise InvalidArgumentError(f"{path}: unknown unit tag {unit}")
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    if data.size != count:
        raise InvalidArgumentError(f"{path}: expected {count} samples, found {data.size}")
    return Waveform(data.astype(np.float64), rate, t0=t0, unit=UNITS[unit])


def write_csv(path, w):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t_seconds", "value"])
        for t, v in zip(w.times().tolist(), w.samples.tolist()):
            out.writerow([repr(t), repr(v)])


def read_csv(path, unit="V"):
    """Read a ``t_seconds,value`` CSV; the rate comes from the first two rows."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 2:
        raise InvalidArgumentError(f"{path}: need at least two samples")
    rate = 1.0 / (data[1, 0] - data[0, 0])
    return Waveform(data[:, 1], rate, t0=data[0, 0], unit=unit)
