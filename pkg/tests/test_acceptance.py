"""Acceptance criteria, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from owlink import budget, codec
from owlink.analysis import build_eye, mask_check, q_factor, waveform_metrics
from owlink.channel import LinkConfig, run_chain
from owlink.cli import main
from owlink.codec import BitStream
from owlink.latency import compose_latency, conversion_delay_estimate, estimate_delay
from owlink.waveform import PulseSpec, Waveform, synthesize

import oracles

FS = 32e9
UI3 = 1 / 2.97e9


def criterion(n, title):
    return pytest.mark.criterion(n, title)


@criterion(1, "Q to SNR pairs within 0.01 dB")
def test_c1_q_to_snr_pairs():
    for q, snr in ((27.42, 28.76), (14.22, 23.06), (32.50, 30.24)):
        assert abs(budget.q_to_snr_db(q) - snr) <= 0.01
        assert abs(20 * math.log10(q) - snr) <= 0.01


@criterion(2, "Q to BER thresholds")
def test_c2_q_ber_thresholds():
    ber7 = budget.q_to_ber(7)
    assert 1.24e-12 <= ber7 <= 1.37e-12
    assert ber7 == pytest.approx(oracles.q_to_ber(7), rel=1e-12)
    q = budget.ber_to_q(4.7e-9)
    assert 5.70 <= q <= 5.78
    assert q == pytest.approx(oracles.ber_to_q(4.7e-9), rel=1e-9)
    assert abs(budget.q_to_snr_db(7) - 16.9) <= 0.1


@criterion(3, "bandwidth rule and UI duration")
def test_c3_bandwidth():
    assert budget.min_bandwidth(2.97e9, 0.5) == 1.485e9
    assert abs(BitStream([0], 2.97e9).ui - 336.7e-12) <= 0.1e-12


@criterion(4, "latency composition and conversion delay")
def test_c4_latency_composition():
    rep = compose_latency(8.56e-9, 12.18e-9, 14e-9)
    assert round(rep.tau_ow_s * 1e9, 9) == 20.74
    assert round(rep.tau_sdi_s * 1e9, 9) == 34.74
    lo, hi = conversion_delay_estimate(60, 1125, (5, 10))
    assert abs(lo - 74.07e-6) <= 0.1e-6
    assert abs(hi - 148.15e-6) <= 0.1e-6


@criterion(5, "delay estimator recovers 8.56 ns within one sample")
def test_c5_delay_estimator():
    t_start = time.perf_counter()
    spec = PulseSpec.nominal(2.97e9)
    lv = codec.nrzi_encode(codec.scramble(codec.prbs15(3200)))
    n = 32001
    x = synthesize(lv, spec, FS)
    y = synthesize(lv, spec, FS, delay_s=8.56e-9)
    x = Waveform(x.samples[:n], FS)
    y = Waveform(y.samples[:n], FS)
    est = estimate_delay(x, y, max_lag_s=20e-9)
    assert abs(est.tau_d_s - 8.56e-9) <= 1 / FS
    # direct-sum lag search over the first 4000 samples keeps the oracle quick
    xs, ys = x.samples[:4000].tolist(), y.samples[:4000].tolist()
    lag, _ = oracles.brute_best_lag(xs, ys, 320)
    assert lag == est.lag_samples
    assert time.perf_counter() - t_start < 5


@criterion(6, "codec round trips and PRBS15 properties")
def test_c6_codec():
    t_start = time.perf_counter()
    rng = np.random.default_rng(2024)
    b = BitStream(rng.integers(0, 2, 1_000_000, dtype=np.uint8), 2.97e9)
    assert codec.descramble(codec.scramble(b)) == b
    for level in (-1, 1):
        lv = codec.nrzi_encode(b, level)
        assert codec.nrzi_decode(lv, level, b.bit_rate) == b
        assert codec.nrzi_decode(-lv, -level, b.bit_rate) == b
    p = codec.prbs15(2 * 32767).bits
    assert np.array_equal(p[:32767], p[32767:])
    assert int(p[:32767].sum()) == 16384
    assert time.perf_counter() - t_start < 10


@criterion(7, "10^6 bits error free, Q in [26, 29], lower Q at 5.94 Gb/s")
def test_c7_end_to_end():
    t_start = time.perf_counter()
    cfg = LinkConfig()
    q = {}
    for rate in (2.97e9, 5.94e9):
        tr = run_chain(codec.prbs15(1_000_000, rate), cfg)
        assert tr.errors.errors == 0
        assert tr.errors.overlap >= 999_000
        q[rate] = q_factor(build_eye(tr.eye_waveform, tr.ui)).q_factor
    print(f"Q at 2.97 Gb/s = {q[2.97e9]:.2f}, Q at 5.94 Gb/s = {q[5.94e9]:.2f}")
    assert 26 <= q[2.97e9] <= 29
    assert q[5.94e9] < q[2.97e9]
    assert time.perf_counter() - t_start < 60


_MASK_LIMITS = dict(vpp=0.8, t_rise=135e-12, t_fall=135e-12, overshoot_frac=0.10)
_MASK_PERTURB = [
    ({"vpp": 0.88 * 1.1}, "amplitude_vpp_v"),
    ({"vpp": 0.72 * 0.9}, "amplitude_vpp_v"),
    ({"t_rise": 135e-12 * 1.1}, "t_rise_s"),
    ({"t_fall": 135e-12 * 1.1}, "t_fall_s"),
    ({"t_fall": 135e-12 - 50e-12 * 1.1}, "rise_fall_mismatch_s"),
    ({"overshoot_frac": 0.10 * 1.1}, "overshoot_frac"),
    ({"dc_offset": 0.5 * 1.1}, "dc_offset_v"),
    ({"dc_offset": -0.5 * 1.1}, "dc_offset_v"),
]


@criterion(8, "mask check at the ST 424 limits")
def test_c8_mask():
    t_start = time.perf_counter()
    lv = codec.nrzi_encode(codec.scramble(codec.prbs15(4009)))[9:]

    def check(**kw):
        spec = PulseSpec(UI3, **dict(_MASK_LIMITS, **kw))
        return mask_check(*waveform_metrics(synthesize(lv, spec, FS), UI3))

    assert check().passed, check().failed_rules()
    for change, rule in _MASK_PERTURB:
        assert check(**change).failed_rules() == [rule], change
    assert time.perf_counter() - t_start < 5


@criterion(9, "invariant suites")
def test_c9_invariants(tmp_path):
    t_start = time.perf_counter()
    cfg = LinkConfig()

    # Q never rises with receiver noise (median over 20 seeds)
    bits = codec.prbs15(20_000)
    medians = []
    for sigma in (0.0042, 0.02, 0.04, 0.08):
        qs = []
        for seed in range(20):
            tr = run_chain(bits, LinkConfig(noise_sigma_v=sigma, seed=seed))
            qs.append(q_factor(build_eye(tr.eye_waveform, tr.ui)).q_factor)
            for w in tr.optical_stages().values():
                assert w.samples.min() >= 0
        medians.append(float(np.median(qs)))
    assert all(a >= b for a, b in zip(medians, medians[1:])), medians

    # optical power stays non-negative under overdrive and at both rates
    for rate, vpp in ((2.97e9, 0.8), (5.94e9, 0.8), (2.97e9, 3.0)):
        tr = run_chain(codec.prbs15(5000, rate), cfg, PulseSpec.nominal(rate)
                       if vpp == 0.8 else PulseSpec(1 / rate, vpp=vpp))
        assert all(w.samples.min() >= 0 for w in tr.optical_stages().values())

    # byte-identical reports
    scen = tmp_path / "s.cfg"
    scen.write_text('preset = "paper-3g"\nscenario.n_bits = 20000\n')
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", str(scen), "--out", str(a)]) == 0
    assert main(["simulate", str(scen), "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    # ber and q invert each other
    for q in np.linspace(0.5, 12, 47):
        assert abs(budget.ber_to_q(budget.q_to_ber(q)) - q) <= 1e-6 * q
    assert time.perf_counter() - t_start < 120
