import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from owlink import codec
from owlink.analysis import edge_times
from owlink.errors import InvalidArgumentError
from owlink.waveform import (PulseSpec, Waveform, add_dc_bias, read_csv, read_waveform,
                             resample, synthesize, write_csv, write_waveform)

import oracles

UI_3G = 1 / 2.97e9
FS = 32e9


def test_constant_high():
    w = synthesize(np.ones(50, np.int8), PulseSpec(UI_3G, vpp=0.8))
    assert np.all(w.samples == 0.4)
    assert w.unit == "V"


def test_sample_count():
    n = 1000
    w = synthesize(codec.nrzi_encode(codec.prbs15(n)), PulseSpec(UI_3G), FS)
    assert len(w) == round(n * UI_3G * FS)
    assert len(w) / n == pytest.approx(10.77, abs=0.01)


def _edges(pattern_ui, n_rep=16):
    # square wave with pattern_ui UI per half period gives n_rep edges of each kind
    block = [-1] * pattern_ui + [1] * pattern_ui
    return np.array(block * n_rep + [-1] * pattern_ui, np.int8)


@pytest.mark.parametrize("t_rise,t_fall", [(135e-12, 135e-12), (100e-12, 100e-12),
                                           (60e-12, 120e-12)])
def test_edge_time_readback(t_rise, t_fall):
    spec = PulseSpec(UI_3G, t_rise=t_rise, t_fall=t_fall)
    e = edge_times(synthesize(_edges(4), spec, FS), UI_3G)
    assert abs(e.t_rise_s - t_rise) <= 1 / FS
    assert abs(e.t_fall_s - t_fall) <= 1 / FS


def test_ideal_edges_faster_than_a_sample():
    spec = PulseSpec(UI_3G, t_rise=0.0, t_fall=0.0)
    e = edge_times(synthesize(_edges(4), spec, FS), UI_3G)
    assert e.t_rise_s < 1 / FS and e.t_fall_s < 1 / FS


def test_sample_rate_too_low():
    with pytest.raises(InvalidArgumentError):
        synthesize(np.ones(8), PulseSpec(UI_3G), 3.9 / UI_3G)


def test_bad_levels():
    with pytest.raises(InvalidArgumentError):
        synthesize(np.array([1, 0, -1]), PulseSpec(UI_3G))
    with pytest.raises(InvalidArgumentError):
        synthesize(np.array([]), PulseSpec(UI_3G))


@given(st.lists(st.sampled_from([-1, 1]), min_size=2, max_size=200),
       st.floats(0.1, 2.0), st.floats(-1, 1), st.floats(0.0, 0.2),
       st.floats(0.0, 0.45), st.floats(0.0, 0.45))
def test_extrema_bounded(levels, vpp, dc, ov, fr, ff):
    spec = PulseSpec(UI_3G, vpp=vpp, dc_offset=dc, t_rise=fr * UI_3G, t_fall=ff * UI_3G,
                     overshoot_frac=ov)
    x = synthesize(np.array(levels, np.int8), spec, FS).samples
    bound = vpp / 2 * (1 + ov) * (1 + 1e-12) + 1e-12
    assert x.max() <= dc + bound
    assert x.min() >= dc - bound


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=100), st.floats(-1, 1))
def test_balanced_mean(half, dc):
    lv = np.array(half + [-v for v in half], np.int8)
    rng = np.random.default_rng(len(half))
    lv = lv[rng.permutation(lv.size)]
    x = synthesize(lv, PulseSpec(UI_3G, dc_offset=dc), FS).samples
    assert abs(x.mean() - dc) <= 0.8 / 1000 + 0.4 / lv.size


def test_delay_shifts_content():
    lv = codec.nrzi_encode(codec.prbs15(200))
    spec = PulseSpec(UI_3G)
    a = synthesize(lv, spec, FS)
    b = synthesize(lv, spec, FS, delay_s=10 / FS)
    np.testing.assert_allclose(b.samples[10:], a.samples[:-10], atol=1e-12)


def test_overshoot_readback():
    spec = PulseSpec(UI_3G, vpp=0.8, overshoot_frac=0.1, t_rise=100e-12, t_fall=100e-12)
    e = edge_times(synthesize(_edges(4), spec, FS), UI_3G)
    # 40 mV on a 400 mV half swing
    assert e.overshoot_frac == pytest.approx(0.10, abs=0.002)


def test_dc_bias():
    w = synthesize(codec.nrzi_encode(codec.prbs15(100)), PulseSpec(UI_3G), FS)
    assert add_dc_bias(w, 0.0).identical(w)
    b = add_dc_bias(w, 2.4)
    assert b.samples.min() >= 2.0 - 1e-12 and b.samples.max() <= 2.8 + 1e-12
    np.testing.assert_allclose(add_dc_bias(b, -2.4).samples, w.samples, atol=1e-15)
    assert (b.sample_rate, b.t0, b.unit) == (w.sample_rate, w.t0, w.unit)


def test_resample_same_rate_identical():
    w = Waveform(np.random.default_rng(0).normal(size=100), FS, t0=1e-9)
    r = resample(w, FS)
    assert r.identical(w) and r.samples is not w.samples


def test_resample_sine_amplitude():
    t = np.arange(8192) / FS
    w = Waveform(np.sin(2 * np.pi * 1e9 * t), FS)
    r = resample(w, 64e9)
    assert r.sample_rate == 64e9
    core = r.samples[1000:-1000]
    amp = oracles.sine_amplitude(core, 1e9, 64e9)
    assert abs(20 * math.log10(amp)) < 0.1


@pytest.mark.parametrize("new_rate", [64e9, 20e9, 40e9])
def test_resample_dc(new_rate):
    w = Waveform(np.full(500, 0.37), FS)
    np.testing.assert_allclose(resample(w, new_rate).samples, 0.37, rtol=1e-9)


def test_resample_in_band_energy():
    fs2 = 20e9
    lim = 0.9 * min(FS, fs2) / 2
    t = np.arange(16384) / FS
    freqs = [0.5e9, 3e9, 7e9, lim * 0.99]
    w = Waveform(sum(np.cos(2 * np.pi * f * t + i) for i, f in enumerate(freqs)), FS)
    r = resample(w, fs2)
    core = r.samples[2000:-2000]
    for f in freqs:
        amp = oracles.sine_amplitude(core, f, fs2)
        assert abs(20 * math.log10(amp)) < 0.1, f


def test_watts_must_be_nonnegative():
    with pytest.raises(InvalidArgumentError):
        Waveform(np.array([0.1, -0.1]), FS, unit="W")
    with pytest.raises(InvalidArgumentError):
        Waveform(np.array([]), FS)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=50),
       st.floats(1.0, 1e12), st.floats(-1.0, 1.0), st.sampled_from(["V", "A"]))
def test_owlwav_roundtrip(tmp_path_factory, xs, rate, t0, unit):
    p = tmp_path_factory.mktemp("w") / "x.owlwav"
    w = Waveform(np.array(xs), rate, t0=t0, unit=unit)
    write_waveform(p, w)
    assert read_waveform(p).identical(w)


def test_owlwav_layout(tmp_path):
    p = tmp_path / "x.owlwav"
    write_waveform(p, Waveform(np.array([1.5, 2.0]), 32e9, t0=0.25, unit="W"))
    raw = p.read_bytes()
    assert raw[:8] == b"OWLWAV1\x00"
    assert int.from_bytes(raw[8:12], "little") == 2
    assert np.frombuffer(raw[12:28], "<f8").tolist() == [32e9, 0.25]
    assert int.from_bytes(raw[28:36], "little") == 2
    assert np.frombuffer(raw[36:], "<f8").tolist() == [1.5, 2.0]


def test_owlwav_bad_magic(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"OWLWAV2\x00" + bytes(28))
    with pytest.raises(InvalidArgumentError):
        read_waveform(p)


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "w.csv"
    w = Waveform(np.array([0.0, 0.5, -0.25]), 32e9, t0=1e-9)
    write_csv(p, w)
    assert p.read_text().splitlines()[0] == "t_seconds,value"
    r = read_csv(p)
    np.testing.assert_array_equal(r.samples, w.samples)
    assert r.sample_rate == pytest.approx(32e9, rel=1e-9)
    assert r.t0 == w.t0
