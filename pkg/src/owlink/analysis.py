"""Eye diagrams and link quality metrics.

Q-factor follows the usual NRZ definition: half the separation of the two
level means over the mean of the two level standard deviations, measured in
a window around the eye centre. SNR is Q squared and BER is
``0.5 * erfc(Q / sqrt(2))``.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from . import budget
from .codec import BitStream
from .errors import DegradedSignalError, InvalidArgumentError

DEFAULT_PHASE_BINS = 256
DEFAULT_AMP_BINS = 256
AUTO_PHASE_GRID = 64

#: 3G-SDI (ST 424) scalar waveform limits.
ST424_LIMITS = {
    "amplitude_vpp_v": (0.720, 0.880),
    "t_rise_s": (None, 135e-12),
    "t_fall_s": (None, 135e-12),
    "rise_fall_mismatch_s": (None, 50e-12),
    "overshoot_frac": (None, 0.10),
    "dc_offset_v": (-0.5, 0.5),
}

# Reporting resolution applied before comparing a reading with its limit.
MASK_RESOLUTION = {
    "amplitude_vpp_v": 1e-4,
    "t_rise_s": 1e-13,
    "t_fall_s": 1e-13,
    "rise_fall_mismatch_s": 1e-13,
    "overshoot_frac": 1e-4,
    "dc_offset_v": 1e-4,
}


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _jsonable(obj):
    return {k: _finite_or_none(v) for k, v in asdict(obj).items()}


# --- eye diagram ------------------------------------------------------------

@dataclass(eq=False)
class EyeDiagram:
    """Two-UI eye histogram.

    ``hist[i, j]`` counts traces whose value at phase column ``i`` fell in
    amplitude bin ``j``. Column ``i`` is centred at ``i * 2 * ui / phase_bins``;
    the sampling instant sits at column ``phase_bins // 2`` (phase = ui).
    """

    ui: float
    hist: np.ndarray
    amp_edges: np.ndarray
    n_traces: int
    clock_phase: float

    @property
    def phase_bins(self):
        return self.hist.shape[0]

    @property
    def amp_bins(self):
        return self.hist.shape[1]

    @property
    def phase_centers(self):
        return np.arange(self.phase_bins) * (2 * self.ui / self.phase_bins)

    @property
    def amp_centers(self):
        return 0.5 * (self.amp_edges[:-1] + self.amp_edges[1:])

    @property
    def amp_step(self):
        return self.amp_edges[1] - self.amp_edges[0]

    @property
    def center_column(self):
        return self.phase_bins // 2

    def __add__(self, other):
        """Merge histograms of segments folded with the same geometry."""
        if (self.hist.shape != other.hist.shape or self.ui != other.ui
                or not np.array_equal(self.amp_edges, other.amp_edges)):
            raise InvalidArgumentError("eye diagrams have different geometry")
        return EyeDiagram(self.ui, self.hist + other.hist, self.amp_edges,
                          self.n_traces + other.n_traces, self.clock_phase)

    def vertical_opening(self, column=None):
        """Eye height ``(mu1 - 3 s1) - (mu0 + 3 s0)`` at one phase column."""
        col = self.center_column if column is None else column
        return _column_opening(self.hist[col], self.amp_centers, self.amp_step)

    def to_csv(self, path):
        """Matrix export: one row per phase bin, one column per amplitude bin."""
        with open(path, "w") as fh:
            fh.write("phase_s\\amplitude_v," + ",".join(repr(a) for a in self.amp_centers.tolist()))
            fh.write("\n")
            for p, row in zip(self.phase_centers.tolist(), self.hist.tolist()):
                fh.write(repr(p) + "," + ",".join(str(c) for c in row) + "\n")

    def to_svg(self, path, nominal_vpp=0.8, dc_offset=0.0):
        with open(path, "w") as fh:
            fh.write(eye_svg(self, nominal_vpp, dc_offset))


def _trace_centers(w, ui, phase):
    t_start = w.t0
    t_end = w.t0 + (w.samples.size - 1) / w.sample_rate
    j_lo = math.ceil((t_start + ui - phase) / ui - 1e-9)
    j_hi = math.floor((t_end - ui - phase) / ui + 1e-9)
    if j_hi < j_lo:
        return np.empty(0)
    return phase + np.arange(j_lo, j_hi + 1) * ui


def _sample_at(w, times):
    fi = (times - w.t0) * w.sample_rate
    i = np.clip(np.floor(fi).astype(np.int64), 0, w.samples.size - 2)
    f = fi - i
    x = w.samples
    return x[i] * (1.0 - f) + x[i + 1] * f


def _amp_index(v, edges):
    n = edges.size - 1
    a = np.floor((v - edges[0]) / (edges[-1] - edges[0]) * n).astype(np.int64)
    return np.clip(a, 0, n - 1)


def _default_amp_edges(w, amp_bins):
    lo, hi = float(w.samples.min()), float(w.samples.max())
    span = hi - lo
    pad = 0.05 * span if span > 0 else max(1e-3 * abs(lo), 1e-6)
    return np.linspace(lo - pad, hi + pad, amp_bins + 1)


def build_eye(w, ui, clock_phase="auto", phase_bins=DEFAULT_PHASE_BINS,
              amp_bins=DEFAULT_AMP_BINS, amp_edges=None):
    """Fold ``w`` into a 2-UI eye histogram.

    One trace starts every UI, centred on a sampling instant
    ``clock_phase + j*ui``; each trace is linearly interpolated at every
    phase column, so the histogram holds ``n_traces * phase_bins`` counts.

    ``clock_phase="auto"`` evaluates a 64-point grid of instants across one
    UI and keeps the one with the largest vertical opening.
    """
    if w.sample_rate * ui < 4:
        raise InvalidArgumentError("need at least 4 samples per UI")
    if w.duration < 32 * ui:
        raise InvalidArgumentError(f"waveform spans {w.duration / ui:.1f} UI; need >= 32")
    edges = _default_amp_edges(w, amp_bins) if amp_edges is None else np.asarray(amp_edges, float)

    if clock_phase == "auto":
        clock_phase = _auto_phase(w, ui, edges)

    centers = _trace_centers(w, ui, clock_phase)
    n_amp = edges.size - 1
    cols = np.arange(phase_bins)
    offsets = cols * (2 * ui / phase_bins) - ui
    counts = np.zeros(phase_bins * n_amp, dtype=np.int64)
    chunk = max(1, 4_000_000 // phase_bins)
    for lo in range(0, centers.size, chunk):
        c = centers[lo:lo + chunk]
        v = _sample_at(w, c[:, None] + offsets[None, :])
        flat = (cols[None, :] * n_amp + _amp_index(v, edges)).ravel()
        counts += np.bincount(flat, minlength=counts.size)
    hist = counts.reshape(phase_bins, n_amp)
    return EyeDiagram(ui, hist, edges, int(centers.size), float(clock_phase))


def _auto_phase(w, ui, edges):
    centres = edges[:-1] + 0.5 * (edges[1] - edges[0])
    n_amp = edges.size - 1
    best, best_open = None, -1.0
    for i in range(AUTO_PHASE_GRID):
        phase = w.t0 + i * ui / AUTO_PHASE_GRID
        c = _trace_centers(w, ui, phase)
        col = np.bincount(_amp_index(_sample_at(w, c), edges), minlength=n_amp)
        opening = _column_opening(col, centres, edges[1] - edges[0])
        if opening > best_open:
            best, best_open = phase, opening
    return best


# --- level statistics --------------------------------------------------------

@dataclass
class LevelSplit:
    threshold: float
    mu_low: float
    mu_high: float
    sigma_low: float
    sigma_high: float
    n_low: int
    n_high: int


def _otsu(counts):
    c = counts.astype(np.float64)
    idx = np.arange(c.size)
    w0 = np.cumsum(c)
    w1 = w0[-1] - w0
    m0 = np.cumsum(c * idx)
    mt = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mt * w0 / w0[-1] - m0) ** 2 / (w0 * w1)
    between[~np.isfinite(between)] = -1
    return int(np.argmax(between))  # last bin of the low class


def split_levels(counts, centers, step):
    """Separate a 1-D amplitude histogram into two levels at its valley.

    Raises :class:`DegradedSignalError` when the histogram is not bimodal.
    Variances carry Sheppard's bin-width correction.
    """
    counts = np.asarray(counts)
    nz = np.flatnonzero(counts)
    if nz.size < 2:
        raise DegradedSignalError("amplitude histogram has a single level")
    k = _otsu(counts)
    lo_part, hi_part = counts[:k + 1], counts[k + 1:]
    if lo_part.sum() == 0 or hi_part.sum() == 0:
        raise DegradedSignalError("amplitude histogram has a single level")

    smooth = np.convolve(counts, np.ones(5) / 5, mode="same") if nz.size > 20 else counts
    p_lo = int(np.argmax(smooth[:k + 1]))
    p_hi = k + 1 + int(np.argmax(smooth[k + 1:]))
    between = smooth[p_lo:p_hi + 1]
    flat = np.flatnonzero(between == between.min())
    valley = p_lo + int(flat[flat.size // 2])
    if smooth[valley] >= 0.8 * min(smooth[p_lo], smooth[p_hi]):
        raise DegradedSignalError("no valley between amplitude modes (eye closed)")
    # samples in the valley bin go to whichever side Otsu put them
    cut = valley if valley <= k else valley - 1
    cut = min(max(cut, p_lo), p_hi - 1)

    def stats(c, x):
        n = c.sum()
        mu = float((c * x).sum() / n)
        var = float((c * (x - mu) ** 2).sum() / n) - step ** 2 / 12.0
        return mu, math.sqrt(max(var, 0.0)), int(n)

    mu_l, s_l, n_l = stats(counts[:cut + 1], centers[:cut + 1])
    mu_h, s_h, n_h = stats(counts[cut + 1:], centers[cut + 1:])
    threshold = float(centers[cut] + step / 2)
    return LevelSplit(threshold, mu_l, mu_h, s_l, s_h, n_l, n_h)


def _column_opening(counts, centers, step):
    try:
        s = split_levels(counts, centers, step)
    except DegradedSignalError:
        return 0.0
    return max(0.0, (s.mu_high - 3 * s.sigma_high) - (s.mu_low + 3 * s.sigma_low))


# --- metrics -----------------------------------------------------------------

@dataclass
class EyeMetrics:
    q_factor: float
    snr_db: float
    ber_est: float
    v_high_mean: float
    v_low_mean: float
    sigma_high: float
    sigma_low: float
    vertical_opening_v: float
    horizontal_opening_ui: float
    t_rise_s: float = None
    t_fall_s: float = None
    overshoot_frac: float = None

    def to_dict(self):
        return _jsonable(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _horizontal_opening(eye, threshold, center_col):
    row = min(max(int(_amp_index(np.array([threshold]), eye.amp_edges)[0]), 0), eye.amp_bins - 1)
    empty = eye.hist[:, row] == 0
    if not empty[center_col]:
        return 0.0
    lo = center_col
    while lo > 0 and empty[lo - 1]:
        lo -= 1
    hi = center_col
    while hi < eye.phase_bins - 1 and empty[hi + 1]:
        hi += 1
    return (hi - lo + 1) * (2.0 / eye.phase_bins)


def q_factor(eye, window_frac=0.2):
    """Q, SNR and BER from the samples in a window around the eye centre.

    The window (``window_frac`` of a UI) is centred on the column with the
    widest vertical opening inside the central UI.

    Raises
    ------
    DegradedSignalError
        If the pooled window histogram is not bimodal.
    """
    if not 0 < window_frac <= 1:
        raise InvalidArgumentError("window_frac must lie in (0, 1]")
    per_ui = eye.phase_bins // 2
    central = np.arange(eye.center_column - per_ui // 2, eye.center_column + per_ui // 2 + 1)
    central = central[(central >= 0) & (central < eye.phase_bins)]
    openings = np.array([eye.vertical_opening(c) for c in central])
    if openings.max() > 0:
        # middle of the widest plateau
        best = np.flatnonzero(openings == openings.max())
        center = int(central[best[best.size // 2]])
    else:
        center = eye.center_column
    half = max(0, int(round(window_frac * per_ui / 2)))
    cols = np.arange(center - half, center + half + 1)
    cols = cols[(cols >= 0) & (cols < eye.phase_bins)]
    pooled = eye.hist[cols].sum(axis=0)

    try:
        s = split_levels(pooled, eye.amp_centers, eye.amp_step)
    except DegradedSignalError as exc:
        raise DegradedSignalError(f"eye closed at centre: {exc}", q_factor=0.0) from None

    v_s = (s.mu_high - s.mu_low) / 2.0
    sigma_n = (s.sigma_high + s.sigma_low) / 2.0
    q = v_s / sigma_n if sigma_n > 0 else math.inf
    if q < 0:
        q = 0.0
    opening = max(0.0, (s.mu_high - 3 * s.sigma_high) - (s.mu_low + 3 * s.sigma_low))
    return EyeMetrics(
        q_factor=q,
        snr_db=budget.q_to_snr_db(q) if q > 0 else -math.inf,
        ber_est=budget.q_to_ber(q) if q > 0 else 0.5,
        v_high_mean=s.mu_high,
        v_low_mean=s.mu_low,
        sigma_high=s.sigma_high,
        sigma_low=s.sigma_low,
        vertical_opening_v=opening,
        horizontal_opening_ui=_horizontal_opening(eye, s.threshold, center),
    )


# --- edges -------------------------------------------------------------------

@dataclass
class EdgeTimes:
    t_rise_s: float
    t_fall_s: float
    overshoot_frac: float
    undershoot_frac: float
    steady_high: float
    steady_low: float
    n_rising: int
    n_falling: int

    @property
    def vpp(self):
        return self.steady_high - self.steady_low

    @property
    def dc_offset(self):
        return 0.5 * (self.steady_high + self.steady_low)


def _steady_level(x, bins=2048):
    counts, edges = np.histogram(x, bins=bins)
    k = int(np.argmax(counts))
    lo, hi = edges[max(k - 1, 0)], edges[min(k + 2, bins)]
    near = x[(x >= lo) & (x <= hi)]
    return float(np.median(near))


def _cubic_crossing(x, j, level):
    """Fractional position in [0, 1] after sample j where the local cubic hits level."""
    n = x.size
    jm = np.clip(j - 1, 0, n - 1)
    jp = np.clip(j + 2, 0, n - 1)
    p0, p1, p2, p3 = x[jm], x[j], x[j + 1], x[jp]
    # Lagrange cubic through u = -1, 0, 1, 2
    def f(u):
        return (p0 * (-u * (u - 1) * (u - 2) / 6) + p1 * ((u + 1) * (u - 1) * (u - 2) / 2)
                + p2 * (-(u + 1) * u * (u - 2) / 2) + p3 * ((u + 1) * u * (u - 1) / 6))
    lo = np.zeros(j.size)
    hi = np.ones(j.size)
    rising = p2 > p1
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        above = f(mid) >= level
        go_left = np.where(rising, above, ~above)
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
    return 0.5 * (lo + hi)


def edge_times(w, ui=None, min_edges=8):
    """20-80 % rise and fall times plus overshoot/undershoot.

    Levels are the modes of the upper and lower amplitude clusters. Edges are
    found with 20 %/80 % hysteresis; each crossing is located to sub-sample
    precision on a local cubic through four samples.
    """
    x = w.samples
    p_lo, p_hi = np.percentile(x, [1, 99])
    mid = 0.5 * (p_lo + p_hi)
    if not p_hi > p_lo:
        raise InvalidArgumentError("waveform has no transitions")
    high = _steady_level(x[x > mid])
    low = _steady_level(x[x <= mid])
    vpp = high - low
    l20 = low + 0.2 * vpp
    l80 = low + 0.8 * vpp

    state = np.zeros(x.size, dtype=np.int8)
    state[x >= l80] = 1
    state[x < l20] = -1
    nz = np.flatnonzero(state)
    s = state[nz]
    change = np.flatnonzero(s[1:] != s[:-1]) + 1
    up = change[s[change] == 1]
    down = change[s[change] == -1]
    if up.size < min_edges or down.size < min_edges:
        raise InvalidArgumentError(
            f"found {up.size} rising / {down.size} falling edges; need >= {min_edges} each")

    def crossing_times(j, level):
        return (j + _cubic_crossing(x, j, level)) / w.sample_rate

    # rising: last sample below 20 %, sample before first at/above 80 %
    r20 = crossing_times(nz[up - 1], l20)
    r80 = crossing_times(nz[up] - 1, l80)
    f80 = crossing_times(nz[down - 1], l80)
    f20 = crossing_times(nz[down] - 1, l20)
    half = vpp / 2
    return EdgeTimes(
        t_rise_s=float(np.mean(r80 - r20)),
        t_fall_s=float(np.mean(f20 - f80)),
        overshoot_frac=float((x.max() - high) / half),
        undershoot_frac=float((low - x.min()) / half),
        steady_high=high,
        steady_low=low,
        n_rising=int(up.size),
        n_falling=int(down.size),
    )


def waveform_metrics(w, ui, clock_phase="auto", window_frac=0.2):
    """Eye metrics with rise/fall/overshoot readbacks filled in."""
    eye = build_eye(w, ui, clock_phase)
    m = q_factor(eye, window_frac)
    e = edge_times(w, ui)
    m.t_rise_s, m.t_fall_s = e.t_rise_s, e.t_fall_s
    m.overshoot_frac = max(e.overshoot_frac, e.undershoot_frac)
    return m, e


# --- mask compliance -----------------------------------------------------------

@dataclass
class RuleResult:
    rule: str
    measured: float
    lower: float
    upper: float
    passed: bool


@dataclass
class ComplianceReport:
    rules: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.rules)

    def failed_rules(self):
        return [r.rule for r in self.rules if not r.passed]

    def __getitem__(self, name):
        for r in self.rules:
            if r.rule == name:
                return r
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "rules": [_jsonable(r) for r in self.rules]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def mask_check(metrics, edges=None, limits=ST424_LIMITS):
    """Check ST 424 scalar waveform limits rule by rule.

    Amplitude and DC offset come from the steady levels in ``edges`` when
    given, otherwise from the eye level means in ``metrics``. Each reading is
    rounded to its reporting resolution before comparison; a missing reading
    fails its rule.
    """
    if edges is not None:
        high, low = edges.steady_high, edges.steady_low
        t_r, t_f = edges.t_rise_s, edges.t_fall_s
        over = max(edges.overshoot_frac, edges.undershoot_frac)
    else:
        high, low = metrics.v_high_mean, metrics.v_low_mean
        t_r, t_f, over = metrics.t_rise_s, metrics.t_fall_s, metrics.overshoot_frac
    readings = {
        "amplitude_vpp_v": high - low,
        "t_rise_s": t_r,
        "t_fall_s": t_f,
        "rise_fall_mismatch_s": None if t_r is None or t_f is None else abs(t_r - t_f),
        "overshoot_frac": over,
        "dc_offset_v": 0.5 * (high + low),
    }
    report = ComplianceReport()
    for name, (lower, upper) in limits.items():
        value = readings[name]
        if value is None:
            report.rules.append(RuleResult(name, None, lower, upper, False))
            continue
        res = MASK_RESOLUTION.get(name)
        shown = round(value / res) * res if res else value
        ok = (lower is None or shown >= lower - 1e-15) and (upper is None or shown <= upper + 1e-15)
        report.rules.append(RuleResult(name, float(value), lower, upper, bool(ok)))
    return report


# --- bit errors ---------------------------------------------------------------

@dataclass
class BitErrorCount:
    errors: int
    ber: float
    offset: int
    overlap: int


def count_bit_errors(tx, rx, max_offset=None, min_overlap=1000):
    """Align ``rx`` to ``tx`` by bit correlation, then count mismatches.

    ``offset`` is the delay of ``rx``: ``rx[k]`` is compared with
    ``tx[k - offset]``.
    """
    a = tx.bits if isinstance(tx, BitStream) else np.asarray(tx)
    b = rx.bits if isinstance(rx, BitStream) else np.asarray(rx)
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("bit streams must be nonempty")
    sa = 2.0 * a - 1.0
    sb = 2.0 * b - 1.0
    corr = signal.correlate(sb, sa, mode="full", method="fft")
    lags = signal.correlation_lags(b.size, a.size, mode="full")
    overlap = np.where(lags >= 0, np.minimum(a.size, b.size - lags),
                       np.minimum(a.size + lags, b.size))
    ok = overlap >= min_overlap
    if max_offset is not None:
        ok &= np.abs(lags) <= max_offset
    if not ok.any():
        raise InvalidArgumentError(f"bit overlap below {min_overlap}")
    cand = np.flatnonzero(ok)
    best = cand[np.argmax(corr[cand])]
    m = int(lags[best])
    n = int(overlap[best])
    if m >= 0:
        errors = int(np.count_nonzero(a[:n] != b[m:m + n]))
    else:
        errors = int(np.count_nonzero(a[-m:-m + n] != b[:n]))
    return BitErrorCount(errors, errors / n, m, n)


# --- rendering -----------------------------------------------------------------

def eye_svg(eye, nominal_vpp=0.8, dc_offset=0.0, width=640, height=480):
    """Heat-map SVG of the eye with the ST 424 amplitude limits overlaid."""
    h = eye.hist.astype(np.float64)
    peak = h.max() if h.max() > 0 else 1.0
    cw = width / eye.phase_bins
    ch = height / eye.amp_bins
    lo, hi = eye.amp_edges[0], eye.amp_edges[-1]

    def y_of(v):
        return height * (hi - v) / (hi - lo)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="black"/>']
    for i, j in zip(*np.nonzero(h)):
        level = math.sqrt(h[i, j] / peak)
        g = int(64 + 191 * level)
        parts.append(f'<rect x="{i * cw:.2f}" y="{height - (j + 1) * ch:.2f}" '
                     f'width="{cw:.2f}" height="{ch:.2f}" fill="rgb(0,{g},{int(255 * level)})"/>')
    amp_lo, amp_hi = ST424_LIMITS["amplitude_vpp_v"]
    over = ST424_LIMITS["overshoot_frac"][1]
    lines = [(amp_lo / 2, "#ffaa00"), (amp_hi / 2, "#ffaa00"),
             (nominal_vpp / 2 * (1 + over), "#ff3333")]
    for level, colour in lines:
        for sign in (1, -1):
            y = y_of(dc_offset + sign * level)
            if 0 <= y <= height:
                parts.append(f'<line x1="0" x2="{width}" y1="{y:.2f}" y2="{y:.2f}" '
                             f'stroke="{colour}" stroke-dasharray="6,4"/>')
    x_mid = width / 2
    parts.append(f'<line x1="{x_mid}" x2="{x_mid}" y1="0" y2="{height}" stroke="#888888"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
