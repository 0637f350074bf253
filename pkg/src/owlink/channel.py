"""Transmitter -> free space -> receiver chain for SDI over a VCSEL link.

Stage order: scramble, NRZI, pulse synthesis, 75->50 ohm pad, optional
reference splitter, bias tee, VCSEL, free-space loss, PIN/TIA photoreceiver,
optional polarity inverter, cable, cable equalizer/reclocker, NRZI decode,
descramble.
"""

import math
from dataclasses import dataclass, field, fields, is_dataclass

import numpy as np
from scipy import signal

from . import analysis, codec
from .codec import BitStream
from .errors import DegradedSignalError, InvalidArgumentError
from .waveform import DEFAULT_SAMPLE_RATE, PulseSpec, Waveform, add_dc_bias, synthesize


@dataclass
class VcselSpec:
    i_th_a: float = 2e-3
    i_roll_a: float = 30e-3
    p_max_w: float = 14e-3
    slope_w_per_a: float = 0.5
    f3db_hz: float = 18e9
    wavelength_nm: float = 940.0

    def validate(self):
        if not 0 < self.i_th_a < self.i_roll_a:
            raise InvalidArgumentError("vcsel: need 0 < i_th_a < i_roll_a")
        if not self.p_max_w > 0 or not self.slope_w_per_a > 0 or not self.f3db_hz > 0:
            raise InvalidArgumentError("vcsel: p_max_w, slope_w_per_a, f3db_hz must be positive")


@dataclass
class PhotoreceiverSpec:
    responsivity_a_per_w: float = 0.5
    tia_gain_v_per_a: float = 5e3
    f_low_hz: float = 10e3
    f_high_hz: float = 2e9
    inverting: bool = True
    vpp_max_v: float = 2.0

    @property
    def conversion_gain_v_per_w(self):
        return self.responsivity_a_per_w * self.tia_gain_v_per_a

    def validate(self):
        if not 0 < self.f_low_hz < self.f_high_hz:
            raise InvalidArgumentError("rx: need 0 < f_low_hz < f_high_hz")
        if not self.responsivity_a_per_w > 0 or not self.vpp_max_v > 0:
            raise InvalidArgumentError("rx: responsivity and vpp_max_v must be positive")


@dataclass
class CeqSpec:
    """Cable equalizer / reclocker.

    The boost is a first-order zero at ``boost_zero_hz`` with its pole at
    ``boost_pole_factor * bit_rate``; no boost when the pole is not above the
    zero. ``slicer_threshold_v`` is a voltage or ``"auto"``.
    """

    enabled: bool = True
    boost_zero_hz: float = 2e9
    boost_pole_factor: float = 0.7
    slicer_threshold_v: object = "auto"
    latency_s: float = 14e-9

    def validate(self):
        if self.latency_s < 0:
            raise InvalidArgumentError("ceq: latency_s must be >= 0")
        if self.slicer_threshold_v != "auto" and not isinstance(self.slicer_threshold_v, (int, float)):
            raise InvalidArgumentError("ceq: slicer_threshold_v must be a number or 'auto'")


# Noise level that puts the default 2.97 Gb/s eye at Q ~ 27.4 (10^6 bits);
# scripts/calibrate_noise.py and mirrored in presets/paper-3g.cfg.
CALIBRATED_NOISE_SIGMA_V = 0.0042


@dataclass
class LinkConfig:
    pad_loss_db: float = 5.7
    splitter_loss_db: float = 3.0
    splitter_enabled: bool = False
    bt_il_db: float = 0.5
    v_dc: float = 2.4
    i_dc: float = 8.42e-3
    drive_impedance: float = 50.0
    vcsel: VcselSpec = field(default_factory=VcselSpec)
    fs_loss_db: float = 10.0
    rx: PhotoreceiverSpec = field(default_factory=PhotoreceiverSpec)
    bpi_il_db: float = 2.0
    bpi_enabled: bool = True
    cable_delay_s: float = 12.18e-9
    ceq: CeqSpec = field(default_factory=CeqSpec)
    noise_sigma_v: float = CALIBRATED_NOISE_SIGMA_V
    seed: int = 1
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE

    def validate(self):
        for name in ("pad_loss_db", "splitter_loss_db", "bt_il_db", "fs_loss_db", "bpi_il_db"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")
        if self.noise_sigma_v < 0:
            raise InvalidArgumentError("noise_sigma_v must be >= 0")
        if not self.drive_impedance > 0 or not self.sample_rate_hz > 0:
            raise InvalidArgumentError("drive_impedance and sample_rate_hz must be positive")
        self.vcsel.validate()
        self.rx.validate()
        self.ceq.validate()
        if not self.vcsel.i_th_a < self.i_dc < self.vcsel.i_roll_a:
            raise InvalidArgumentError("i_dc must lie inside the VCSEL linear range")
        return self

    # flat dotted-key view, used by the config file loader and the CLI
    def to_flat(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if is_dataclass(value):
                for g in fields(value):
                    out[f"{f.name}.{g.name}"] = getattr(value, g.name)
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_flat(cls, flat):
        cfg = cls()
        for key, value in flat.items():
            set_flat(cfg, key, value)
        return cfg


def flat_keys():
    """Dotted key -> default value for every LinkConfig field."""
    return LinkConfig().to_flat()


def set_flat(cfg, key, value):
    head, _, tail = key.partition(".")
    if not hasattr(cfg, head):
        raise KeyError(key)
    if tail:
        sub = getattr(cfg, head)
        if not is_dataclass(sub) or not hasattr(sub, tail):
            raise KeyError(key)
        setattr(sub, tail, value)
    else:
        if is_dataclass(getattr(cfg, head)):
            raise KeyError(key)
        setattr(cfg, head, value)


# --- stages -------------------------------------------------------------------

def db_to_amplitude(db):
    return 10.0 ** (-db / 20.0)


def db_to_power(db):
    return 10.0 ** (-db / 10.0)


def liv_power(current, vcsel):
    """Static light-current curve: clipped-linear between threshold and roll-over."""
    return np.clip(vcsel.slope_w_per_a * (np.asarray(current) - vcsel.i_th_a), 0.0, vcsel.p_max_w)


def _one_pole(f3db, fs):
    """Coefficient ``a`` of ``y[n] = a y[n-1] + (1-a) x[n]``.

    Below Nyquist, ``a`` puts the magnitude exactly 3 dB down at ``f3db``;
    above it the pole is impulse-invariant (the filter is nearly transparent).
    """
    w = 2 * math.pi * f3db / fs
    if w < math.pi:
        c = 2.0 - math.cos(w)
        return c - math.sqrt(c * c - 1.0)
    return math.exp(-w)


def vcsel_transfer(drive, cfg, v_bias=0.0):
    """Drive voltage to optical power.

    ``i = i_dc + (v - v_bias) / drive_impedance``, mapped through the
    clipped-linear LIV curve and then a single-pole low-pass at
    ``vcsel.f3db_hz``. The pole keeps positive coefficients so the output
    never goes negative.
    """
    if drive.unit != "V":
        raise InvalidArgumentError("vcsel_transfer expects a volts waveform")
    current = cfg.i_dc + (drive.samples - v_bias) / cfg.drive_impedance
    p = liv_power(current, cfg.vcsel)
    a = _one_pole(cfg.vcsel.f3db_hz, drive.sample_rate)
    y, _ = signal.lfilter([1.0 - a], [1.0, -a], p, zi=[a * p[0]])
    return drive.with_samples(np.maximum(y, 0.0), unit="W")


def _receiver_filters(rx, fs):
    hp = signal.butter(1, rx.f_low_hz, btype="highpass", fs=fs, output="sos")
    f_hi = min(rx.f_high_hz, 0.45 * fs)
    lp = signal.bessel(4, f_hi, btype="lowpass", norm="mag", fs=fs, output="sos")
    return hp, lp


def photoreceiver_transfer(light, cfg, rng=None, settled=True):
    """Optical power to TIA output voltage.

    Conversion ``sign * G_tia * R``, first-order high-pass at ``f_low_hz``,
    fourth-order Bessel low-pass at ``f_high_hz``, additive Gaussian noise of
    ``cfg.noise_sigma_v`` and ``tanh`` saturation at ``vpp_max_v / 2``.

    With ``settled`` the AC coupling starts in steady state for the record's
    mean power (a link that has been running); otherwise it starts
    discharged, as at switch-on.
    """
    if light.unit != "W":
        raise InvalidArgumentError("photoreceiver_transfer expects a watts waveform")
    rx = cfg.rx
    sign = -1.0 if rx.inverting else 1.0
    v = sign * rx.conversion_gain_v_per_w * light.samples
    hp, lp = _receiver_filters(rx, light.sample_rate)
    zi_hp = signal.sosfilt_zi(hp) * (v.mean() if settled else 0.0)
    v, _ = signal.sosfilt(hp, v, zi=zi_hp)
    v, _ = signal.sosfilt(lp, v, zi=signal.sosfilt_zi(lp) * v[0])
    if cfg.noise_sigma_v > 0:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        v = v + rng.normal(0.0, cfg.noise_sigma_v, v.size)
    vmax = rx.vpp_max_v / 2.0
    if math.isfinite(vmax):
        v = vmax * np.tanh(v / vmax)
    return light.with_samples(v, unit="V")


def _equalizer_sos(ceq, bit_rate, fs):
    f_zero = ceq.boost_zero_hz
    f_pole = min(ceq.boost_pole_factor * bit_rate, 0.45 * fs)
    if f_pole <= f_zero:
        return None
    wz, wp = 2 * math.pi * f_zero, 2 * math.pi * f_pole
    z, p, k = signal.bilinear_zpk([-wz], [-wp], wp / wz, fs)
    return signal.zpk2sos(z, p, k)


@dataclass
class CeqResult:
    levels: np.ndarray
    reclocked: Waveform
    latency_s: float
    first_decision_s: float
    threshold_v: float
    equalized: Waveform


def _mode_midpoint(x):
    counts, edges = np.histogram(x, bins=256)
    centers = 0.5 * (edges[:-1] + edges[1:])
    s = analysis.split_levels(counts, centers, edges[1] - edges[0])
    k = np.searchsorted(centers, s.threshold)
    lo_mode = centers[int(np.argmax(counts[:k]))]
    hi_mode = centers[k + int(np.argmax(counts[k:]))]
    return 0.5 * (lo_mode + hi_mode)


def cable_equalizer(rx_wave, cfg, ui, phases=64):
    """Equalize, recover the clock phase, slice one level per UI, reclock.

    The phase is the one of ``phases`` candidates across a UI that maximizes
    the mean distance of the samples from the slicing threshold.

    Raises
    ------
    DegradedSignalError
        When the amplitude distribution at the chosen phase is not bimodal.
    """
    if rx_wave.duration < 64 * ui:
        raise InvalidArgumentError("cable_equalizer needs at least 64 UI of signal")
    ceq = cfg.ceq
    x = rx_wave.samples
    fs = rx_wave.sample_rate
    if ceq.enabled:
        sos = _equalizer_sos(ceq, 1.0 / ui, fs)
        if sos is not None:
            x, _ = signal.sosfilt(sos, x, zi=signal.sosfilt_zi(sos) * x[0])
    eq = rx_wave.with_samples(x)

    if ceq.slicer_threshold_v == "auto":
        try:
            thr = _mode_midpoint(x)
        except DegradedSignalError as exc:
            raise DegradedSignalError(f"equalizer input: {exc}", q_factor=0.0) from None
    else:
        thr = float(ceq.slicer_threshold_v)

    t_last = eq.t0 + (x.size - 1) / fs
    best = None
    for i in range(phases):
        start = eq.t0 + i * ui / phases
        n = int(math.floor((t_last - start) / ui)) + 1
        v = analysis._sample_at(eq, start + np.arange(n) * ui)
        score = float(np.mean(np.abs(v - thr)))
        if best is None or score > best[0]:
            best = (score, start, v)
    _, start, v = best

    counts, edges = np.histogram(v, bins=128)
    centers = 0.5 * (edges[:-1] + edges[1:])
    try:
        s = analysis.split_levels(counts, centers, edges[1] - edges[0])
    except DegradedSignalError as exc:
        raise DegradedSignalError(f"eye closed at decision point: {exc}", q_factor=0.0) from None
    sep = s.sigma_high + s.sigma_low
    q = (s.mu_high - s.mu_low) / sep if sep > 0 else math.inf
    if q < 1.0:
        raise DegradedSignalError(f"eye closed at decision point (Q = {q:.2f})", q_factor=q)

    levels = np.where(v >= thr, 1, -1).astype(np.int8)
    latency = ceq.latency_s if ceq.enabled else 0.0
    pulse = PulseSpec.nominal(1.0 / ui)
    reclocked = synthesize(levels, pulse, fs, t0=start - ui / 2 + latency)
    return CeqResult(levels, reclocked, latency, start, thr, eq)


# --- full chain -------------------------------------------------------------------

EYE_STAGE = "ceq_equalized"


@dataclass
class ChainTrace:
    stages: dict
    tx_bits: BitStream
    tx_levels: np.ndarray
    rx_levels: np.ndarray
    recovered: BitStream
    errors: analysis.BitErrorCount
    ceq: CeqResult
    stage_delays: dict
    ui: float

    @property
    def group_delay_s(self):
        return float(sum(self.stage_delays.values()))

    @property
    def eye_waveform(self):
        """Equalized signal seen by the slicer, before reclocking."""
        return self.stages[EYE_STAGE]

    def optical_stages(self):
        return {k: w for k, w in self.stages.items() if w.unit == "W"}


def _low_freq_delay(b, a, fs, f=1e6):
    _, gd = signal.group_delay((b, a), w=[f], fs=fs)
    return float(gd[0]) / fs


def run_chain(bits, cfg=None, pulse=None, descrambler_sync=9, acquisition_ui=1):
    """Simulate the whole link for one bit stream.

    Returns every intermediate waveform, the recovered bits and the
    bit-error count against the input. The first ``acquisition_ui`` sliced
    levels may sample the line before the first bit arrives and are
    discarded, as is the descrambler's ``descrambler_sync``-bit start-up.
    Deterministic for a given ``cfg.seed``.
    """
    cfg = (cfg or LinkConfig()).validate()
    if pulse is None:
        pulse = PulseSpec.nominal(bits.bit_rate)
    if not math.isclose(pulse.ui, 1.0 / bits.bit_rate, rel_tol=1e-9):
        raise InvalidArgumentError("pulse.ui must equal 1 / bits.bit_rate")
    ui = pulse.ui
    fs = cfg.sample_rate_hz
    rng = np.random.default_rng(cfg.seed)
    stages = {}
    delays = {}

    tx_levels = codec.nrzi_encode(codec.scramble(bits), initial_level=-1)
    w = synthesize(tx_levels, pulse, fs)
    stages["source"] = w
    w = w.scaled(db_to_amplitude(cfg.pad_loss_db))
    stages["pad"] = w
    if cfg.splitter_enabled:
        w = w.scaled(db_to_amplitude(cfg.splitter_loss_db))
        stages["splitter"] = w
    w = add_dc_bias(w.scaled(db_to_amplitude(cfg.bt_il_db)), cfg.v_dc)
    stages["bias_tee"] = w

    light = vcsel_transfer(w, cfg, v_bias=cfg.v_dc)
    a = _one_pole(cfg.vcsel.f3db_hz, fs)
    delays["vcsel"] = _low_freq_delay([1 - a], [1, -a], fs)
    stages["optical_tx"] = light
    light = light.scaled(db_to_power(cfg.fs_loss_db))
    stages["optical_rx"] = light

    w = photoreceiver_transfer(light, cfg, rng)
    hp, lp = _receiver_filters(cfg.rx, fs)
    delays["photoreceiver"] = _low_freq_delay(*signal.sos2tf(lp), fs)
    stages["photoreceiver"] = w
    if cfg.bpi_enabled:
        w = w.scaled(-db_to_amplitude(cfg.bpi_il_db))
        stages["inverter"] = w
    w = w.delayed(cfg.cable_delay_s)
    delays["cable"] = cfg.cable_delay_s
    stages["ceq_input"] = w

    ceq = cable_equalizer(w, cfg, ui)
    sos = _equalizer_sos(cfg.ceq, 1.0 / ui, fs) if cfg.ceq.enabled else None
    if sos is not None:
        delays["ceq_boost"] = _low_freq_delay(*signal.sos2tf(sos), fs)
    delays["ceq"] = ceq.latency_s
    stages[EYE_STAGE] = ceq.equalized
    stages["ceq_output"] = ceq.reclocked

    rx_levels = ceq.levels[acquisition_ui:]
    decoded = codec.nrzi_decode(rx_levels[1:], int(rx_levels[0]), bit_rate=bits.bit_rate)
    recovered = codec.descramble(decoded)
    recovered = BitStream(recovered.bits[descrambler_sync:], bits.bit_rate)
    errors = analysis.count_bit_errors(bits, recovered, max_offset=1024,
                                       min_overlap=min(1000, len(recovered)))
    return ChainTrace(stages, bits, tx_levels, rx_levels, recovered, errors, ceq, delays, ui)
