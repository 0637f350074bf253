"""SDI channel-coding layer: PRBS sources, self-synchronizing scrambler, NRZI.

Bits are ``uint8`` arrays of 0/1 in transmission order. NRZI levels are
``int8`` arrays of -1/+1. The scrambler is the x^9 + x^4 + 1 multiplicative
(self-synchronizing) type used by the SMPTE serial interfaces; NRZI is the
x + 1 differential stage that follows it.
"""

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import sympy

from .errors import InvalidArgumentError

#: Standard SDI serial rates in bit/s.
SDI_BIT_RATES = {
    "SD-SDI": 270e6,
    "HD-SDI": 1.485e9,
    "3G-SDI": 2.97e9,
    "6G-SDI": 5.94e9,
    "12G-SDI": 11.88e9,
    "24G-SDI": 23.76e9,
}

SCRAMBLER_TAPS = (4, 9)
SCRAMBLER_LENGTH = 9


@dataclass(frozen=True)
class BitStream:
    """Flat binary sequence with its serial rate.

    ``warnings`` collects non-fatal notes attached by the producer, such as
    a PRBS generated from a tap set that is not maximal-length.
    """

    bits: np.ndarray
    bit_rate: float
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1:
            raise InvalidArgumentError("bits must be one-dimensional")
        if bits.size and not np.all((bits == 0) | (bits == 1)):
            raise InvalidArgumentError("bits must contain only 0 and 1")
        if not self.bit_rate > 0:
            raise InvalidArgumentError(f"bit_rate must be positive, got {self.bit_rate}")
        object.__setattr__(self, "bits", bits.astype(np.uint8, copy=False))
        object.__setattr__(self, "bit_rate", float(self.bit_rate))

    def __len__(self):
        return int(self.bits.size)

    def __eq__(self, other):
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.bit_rate == other.bit_rate and np.array_equal(self.bits, other.bits)

    @property
    def ui(self):
        """Unit interval in seconds."""
        return 1.0 / self.bit_rate


@dataclass(frozen=True)
class LfsrSpec:
    """Fibonacci LFSR: feedback taps are 1-based register positions.

    The output bit of each step is the register's highest position
    (``length``) before the shift.
    """

    taps: tuple
    length: int
    seed: int

    def __post_init__(self):
        taps = tuple(sorted({int(t) for t in self.taps}, reverse=True))
        object.__setattr__(self, "taps", taps)
        if self.length < 1:
            raise InvalidArgumentError("LFSR length must be >= 1")
        if not taps or min(taps) < 1 or max(taps) > self.length:
            raise InvalidArgumentError(f"taps {taps} must lie in 1..{self.length}")
        mask = (1 << self.length) - 1
        if self.seed & mask == 0:
            raise InvalidArgumentError("LFSR seed must be nonzero (all-zero state is a fixed point)")
        if self.seed & ~mask:
            raise InvalidArgumentError(f"seed does not fit in {self.length} bits")

    @classmethod
    def prbs(cls, order, seed=None):
        """Conventional maximal PRBS polynomial of the given order.

        ``seed`` defaults to all ones.
        """
        try:
            taps = PRBS_TAPS[order]
        except KeyError:
            raise InvalidArgumentError(f"no standard PRBS polynomial for order {order}") from None
        if seed is None:
            seed = (1 << order) - 1
        return cls(taps=taps, length=order, seed=seed)


PRBS_TAPS = {
    7: (7, 6),
    9: (9, 5),
    11: (11, 9),
    15: (15, 14),
    20: (20, 3),
    23: (23, 18),
    31: (31, 28),
}


def _gf2_mulmod(a, b, mod, deg):
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= mod
    return result


def _gf2_powmod(base, exp, mod, deg):
    result = 1
    while exp:
        if exp & 1:
            result = _gf2_mulmod(result, base, mod, deg)
        base = _gf2_mulmod(base, base, mod, deg)
        exp >>= 1
    return result


def is_maximal(taps, length):
    """True if the tap set gives a maximal-length (2**length - 1) sequence.

    Equivalent to the feedback polynomial 1 + sum(x**t) being primitive over
    GF(2): x must have multiplicative order exactly 2**length - 1.
    """
    taps = {int(t) for t in taps}
    if length not in taps:
        return False
    poly = 1
    for t in taps:
        poly |= 1 << t
    period = (1 << length) - 1
    if length == 1:
        return True
    x = 0b10
    if _gf2_powmod(x, period, poly, length) != 1:
        return False
    for q in sympy.factorint(period):
        if _gf2_powmod(x, period // q, poly, length) == 1:
            return False
    return True


def generate_prbs(spec, n_bits, bit_rate=2.97e9):
    """First ``n_bits`` of the LFSR output sequence.

    The register is stepped until either ``n_bits`` outputs exist or the
    state returns to the seed; in the latter case the period is tiled.

    Returns
    -------
    BitStream
        With a ``warnings`` entry when the taps are not maximal-length.
    """
    if n_bits < 1:
        raise InvalidArgumentError("n_bits must be >= 1")
    length = spec.length
    mask = (1 << length) - 1
    out_shift = length - 1
    tap_shifts = [t - 1 for t in spec.taps]

    state = spec.seed
    out = []
    append = out.append
    while len(out) < n_bits:
        append((state >> out_shift) & 1)
        fb = 0
        for s in tap_shifts:
            fb ^= state >> s
        state = ((state << 1) | (fb & 1)) & mask
        if state == spec.seed:
            break
    bits = np.array(out, dtype=np.uint8)
    if bits.size < n_bits:
        bits = np.resize(bits, n_bits)

    notes = ()
    if length <= 64 and not is_maximal(spec.taps, length):
        notes = (f"taps {spec.taps} are not maximal for length {length}; "
                 f"period is below {mask}",)
    return BitStream(bits, bit_rate, warnings=notes)


def prbs15(n_bits, bit_rate=2.97e9):
    """PRBS15 (x^15 + x^14 + 1, all-ones seed)."""
    return generate_prbs(LfsrSpec.prbs(15), n_bits, bit_rate)


def _as_bits(stream):
    if isinstance(stream, BitStream):
        return stream.bits, stream.bit_rate
    return np.asarray(stream, dtype=np.uint8), None


def scramble(stream, state=0):
    """Self-synchronizing scrambler, G1(x) = x^9 + x^4 + 1.

    ``out[k] = in[k] ^ out[k-4] ^ out[k-9]``. ``state`` is the 9-bit history
    of previous outputs (bit j holds the output j+1 steps back); zero by
    default.
    """
    bits, rate = _as_bits(stream)
    if bits.size == 0:
        raise InvalidArgumentError("cannot scramble an empty stream")
    reg = int(state) & 0x1FF
    out = []
    append = out.append
    for b in bits.tolist():
        o = b ^ ((reg >> 3) & 1) ^ ((reg >> 8) & 1)
        append(o)
        reg = ((reg << 1) | o) & 0x1FF
    result = np.array(out, dtype=np.uint8)
    return BitStream(result, rate) if rate is not None else result


def descramble(stream, state=0):
    """Inverse of :func:`scramble`: ``out[k] = in[k] ^ in[k-4] ^ in[k-9]``.

    Self-synchronizing: after 9 bits the output is independent of ``state``.
    """
    bits, rate = _as_bits(stream)
    if bits.size == 0:
        raise InvalidArgumentError("cannot descramble an empty stream")
    history = np.array([(int(state) >> j) & 1 for j in range(8, -1, -1)], dtype=np.uint8)
    ext = np.concatenate([history, bits])
    n = bits.size
    out = ext[9:] ^ ext[9 - 4:9 - 4 + n] ^ ext[0:n]
    return BitStream(out, rate) if rate is not None else out


def _check_level(level):
    if level not in (-1, 1):
        raise InvalidArgumentError(f"initial_level must be -1 or +1, got {level}")


def nrzi_encode(stream, initial_level=-1):
    """Toggle the line level on every 1 bit.

    Returns an ``int8`` array of -1/+1 the same length as the input.
    """
    _check_level(initial_level)
    bits, _ = _as_bits(stream)
    if bits.size == 0:
        raise InvalidArgumentError("cannot encode an empty stream")
    parity = np.bitwise_xor.accumulate(bits)
    levels = np.where(parity, -initial_level, initial_level)
    return levels.astype(np.int8)


def nrzi_decode(levels, initial_level=-1, bit_rate=2.97e9):
    """``bit[k] = 1`` iff ``levels[k] != levels[k-1]`` (``levels[-1]`` is ``initial_level``)."""
    _check_level(initial_level)
    levels = np.asarray(levels)
    if levels.size == 0:
        raise InvalidArgumentError("cannot decode an empty level sequence")
    if not np.all((levels == 1) | (levels == -1)):
        raise InvalidArgumentError("levels must be -1 or +1")
    prev = np.empty_like(levels)
    prev[0] = initial_level
    prev[1:] = levels[:-1]
    return BitStream((levels != prev).astype(np.uint8), bit_rate)


class LineTiming(NamedTuple):
    frame_duration: float
    line_duration: float


def sdi_line_timing(frame_rate, lines_per_frame):
    """Frame and line periods for a raster at ``frame_rate`` frames/s."""
    if not frame_rate > 0:
        raise InvalidArgumentError("frame_rate must be positive")
    if not lines_per_frame >= 1:
        raise InvalidArgumentError("lines_per_frame must be >= 1")
    frame = 1.0 / frame_rate
    return LineTiming(frame, frame / lines_per_frame)


# --- packed bit files -------------------------------------------------------

BITS_MAGIC = b"OWLBITS\x00"
_BITS_HEADER = struct.Struct("<8sQd")


def write_bits(path, stream):
    """Write an OWLBITS file: magic, u64 bit count, f64 rate, LSB-first bytes."""
    packed = np.packbits(stream.bits, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(_BITS_HEADER.pack(BITS_MAGIC, len(stream), stream.bit_rate))
        fh.write(packed.tobytes())


def read_bits(path):
    with open(path, "rb") as fh:
        header = fh.read(_BITS_HEADER.size)
        if len(header) < _BITS_HEADER.size:
            raise InvalidArgumentError(f"{path}: truncated OWLBITS header")
        magic, count, rate = _BITS_HEADER.unpack(header)
        if magic != BITS_MAGIC:
            raise InvalidArgumentError(f"{path}: bad magic {magic!r}")
        payload = np.frombuffer(fh.read(), dtype=np.uint8)
    if payload.size * 8 < count:
        raise InvalidArgumentError(f"{path}: expected {count} bits, file holds {payload.size * 8}")
    bits = np.unpackbits(payload, count=count, bitorder="little")
    return BitStream(bits, rate)

