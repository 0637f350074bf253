import numpy as np
import pytest
from hypothesis import given, strategies as st

from owlink import codec
from owlink.codec import BitStream, LfsrSpec
from owlink.errors import InvalidArgumentError

import oracles

bit_lists = st.lists(st.integers(0, 1), min_size=1, max_size=400)


# --- PRBS --------------------------------------------------------------------------

def test_prbs15_period_and_balance():
    s = codec.prbs15(2 * 32767).bits
    assert np.array_equal(s[:32767], s[32767:])
    assert int(s[:32767].sum()) == 16384
    # no shorter period
    assert not np.array_equal(s[:32767 - 1], s[1:32767])


def test_prbs15_matches_list_register():
    got = codec.prbs15(3000).bits.tolist()
    assert got == oracles.lfsr_bits((15, 14), 15, (1 << 15) - 1, 3000)


@pytest.mark.parametrize("order", sorted(codec.PRBS_TAPS))
def test_standard_polynomials_are_maximal(order):
    assert codec.is_maximal(codec.PRBS_TAPS[order], order)


def test_length3_enumeration():
    spec = LfsrSpec((3, 2), 3, 0b001)
    bits = codec.generate_prbs(spec, 7).bits.tolist()
    assert bits == oracles.lfsr_bits((3, 2), 3, 1, 7)
    assert sum(bits) == 4
    # the register walks through all seven nonzero states
    states = set()
    reg = 1
    for _ in range(7):
        states.add(reg)
        fb = ((reg >> 2) ^ (reg >> 1)) & 1
        reg = ((reg << 1) | fb) & 7
    assert states == set(range(1, 8))


def test_single_bit_is_output_of_seed():
    spec = LfsrSpec((15, 14), 15, 0b100000000000000)
    assert codec.generate_prbs(spec, 1).bits.tolist() == [1]
    spec = LfsrSpec((15, 14), 15, 0b000000000000001)
    assert codec.generate_prbs(spec, 1).bits.tolist() == [0]


def test_zero_seed_rejected():
    with pytest.raises(InvalidArgumentError):
        LfsrSpec((15, 14), 15, 0)


def test_non_maximal_taps_flagged():
    # 1 + x^2 + x^4 = (1 + x + x^2)^2 is not primitive
    s = codec.generate_prbs(LfsrSpec((4, 2), 4, 1), 50)
    assert s.warnings
    assert not codec.is_maximal((4, 2), 4)
    assert codec.generate_prbs(LfsrSpec((4, 3), 4, 1), 50).warnings == ()


@given(st.integers(2, 10), st.data())
def test_is_maximal_agrees_with_period_enumeration(length, data):
    taps = data.draw(st.sets(st.integers(1, length - 1), max_size=3))
    taps = tuple(sorted(taps | {length}, reverse=True))
    n = 2 * ((1 << length) - 1)
    bits = oracles.lfsr_bits(taps, length, 1, n)
    period = (1 << length) - 1
    reg_period = None
    # find the state period by stepping the register directly
    reg = [1] + [0] * (length - 1)
    start = list(reg)
    for k in range(1, period + 1):
        fb = 0
        for t in taps:
            fb ^= reg[t - 1]
        reg = [fb] + reg[:-1]
        if reg == start:
            reg_period = k
            break
    assert codec.is_maximal(taps, length) == (reg_period == period)
    assert len(bits) == n


# --- scrambler --------------------------------------------------------------------

def test_scramble_zero_fixed_point():
    z = np.zeros(1000, dtype=np.uint8)
    assert not codec.scramble(z).any()


def test_scrambler_impulse_response_by_polynomial_division():
    n = 40
    impulse = np.zeros(n, dtype=np.uint8)
    impulse[0] = 1
    got = codec.scramble(impulse).tolist()
    # 1 / (1 + x^4 + x^9) over GF(2)
    want = oracles.gf2_divide_series([1], [1, 0, 0, 0, 1, 0, 0, 0, 0, 1], n)
    assert got == want
    assert [k for k in range(10) if got[k]] == [0, 4, 8, 9]


def test_descrambler_impulse_response():
    impulse = np.zeros(20, dtype=np.uint8)
    impulse[0] = 1
    assert np.flatnonzero(codec.descramble(impulse)).tolist() == [0, 4, 9]


@given(bit_lists)
def test_scramble_matches_reference(bits):
    assert codec.scramble(np.array(bits, np.uint8)).tolist() == oracles.scramble_poly(bits)


@given(bit_lists)
def test_scramble_roundtrip(bits):
    b = np.array(bits, dtype=np.uint8)
    assert np.array_equal(codec.descramble(codec.scramble(b)), b)


@given(bit_lists, bit_lists)
def test_scramble_xor_linear(a, b):
    n = min(len(a), len(b))
    a = np.array(a[:n], np.uint8)
    b = np.array(b[:n], np.uint8)
    assert np.array_equal(codec.scramble(a ^ b), codec.scramble(a) ^ codec.scramble(b))


@given(st.lists(st.integers(0, 1), min_size=20, max_size=200),
       st.integers(0, 511), st.integers(0, 511))
def test_descrambler_self_synchronizes(bits, s1, s2):
    b = np.array(bits, np.uint8)
    scrambled = codec.scramble(b, state=s1)
    out = codec.descramble(scrambled, state=s2)
    assert np.array_equal(out[9:], b[9:])


def test_scramble_roundtrip_million_bits():
    rng = np.random.default_rng(7)
    b = BitStream(rng.integers(0, 2, 1_000_000, dtype=np.uint8), 2.97e9)
    assert codec.descramble(codec.scramble(b)) == b


def test_empty_stream_rejected():
    with pytest.raises(InvalidArgumentError):
        codec.scramble(np.zeros(0, np.uint8))


# --- NRZI ---------------------------------------------------------------------------

def test_nrzi_examples():
    assert codec.nrzi_encode(np.array([1, 1, 0, 1]), -1).tolist() == [1, -1, -1, 1]
    assert codec.nrzi_encode(np.zeros(5, np.uint8), 1).tolist() == [1] * 5
    assert codec.nrzi_decode(np.ones(6, np.int8)).bits.tolist() == [1, 0, 0, 0, 0, 0]
    assert codec.nrzi_decode(np.ones(6, np.int8), 1).bits.tolist() == [0] * 6
    alt = np.array([1, -1, 1, -1])
    assert codec.nrzi_decode(alt, -1).bits.tolist() == [1, 1, 1, 1]


@given(bit_lists, st.sampled_from([-1, 1]))
def test_nrzi_matches_reference_and_roundtrips(bits, level):
    b = np.array(bits, np.uint8)
    lv = codec.nrzi_encode(b, level)
    assert lv.tolist() == oracles.nrzi_levels(bits, level)
    assert codec.nrzi_decode(lv, level).bits.tolist() == bits


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=300), st.sampled_from([-1, 1]))
def test_nrzi_polarity_insensitive(levels, level):
    lv = np.array(levels, np.int8)
    assert codec.nrzi_decode(-lv, -level) == codec.nrzi_decode(lv, level)


def test_bad_level_rejected():
    with pytest.raises(InvalidArgumentError):
        codec.nrzi_encode(np.array([1]), 0)
    with pytest.raises(InvalidArgumentError):
        codec.nrzi_decode(np.array([1, 0, 1]))


# --- timing and files ---------------------------------------------------------------

def test_line_timing():
    t = codec.sdi_line_timing(60, 1125)
    assert t.frame_duration == pytest.approx(16.67e-3, abs=5e-6)
    assert t.line_duration == pytest.approx(14.81e-6, abs=5e-9)
    assert codec.sdi_line_timing(1, 1) == (1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        codec.sdi_line_timing(0, 1125)
    with pytest.raises(InvalidArgumentError):
        codec.sdi_line_timing(60, 0)


def test_bitstream_validation():
    with pytest.raises(InvalidArgumentError):
        BitStream(np.array([0, 2]), 1e9)
    with pytest.raises(InvalidArgumentError):
        BitStream(np.array([0, 1]), 0)
    assert BitStream([0, 1], 2.97e9).ui == pytest.approx(336.7e-12, abs=0.1e-12)


@given(st.lists(st.integers(0, 1), min_size=0, max_size=100),
       st.floats(1.0, 1e11, allow_nan=False))
def test_owlbits_roundtrip(tmp_path_factory, bits, rate):
    path = tmp_path_factory.mktemp("bits") / "x.owlbits"
    s = BitStream(np.array(bits, np.uint8), rate)
    codec.write_bits(path, s)
    assert codec.read_bits(path) == s


def test_owlbits_layout(tmp_path):
    path = tmp_path / "b.owlbits"
    codec.write_bits(path, BitStream([1, 0, 0, 0, 0, 0, 0, 0, 1], 2.97e9))
    raw = path.read_bytes()
    assert raw[:8] == b"OWLBITS\x00"
    assert int.from_bytes(raw[8:16], "little") == 9
    assert raw[24:] == bytes([0x01, 0x01])


def test_owlbits_bad_magic(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"NOTBITS\x00" + bytes(16))
    with pytest.raises(InvalidArgumentError):
        codec.read_bits(path)
