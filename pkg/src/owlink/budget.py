"""Bandwidth and error-rate arithmetic, crash-knee thresholds, SDI variant table."""

import csv
import io
import math
from dataclasses import dataclass

from scipy import optimize, special

from .errors import InvalidArgumentError, NotFoundError

NYQUIST_FACTOR = 0.5
HEADROOM_FACTOR = 0.7


@dataclass(frozen=True)
class SdiVariant:
    name: str
    standard: str
    data_rate_bps: float
    video_format: str


SDI_VARIANTS = (
    SdiVariant("SD-SDI", "ST 259", 270e6, "SD (480i @ 30 fps)"),
    SdiVariant("SD-SDI", "ST 259", 270e6, "SD (576i @ 25 fps)"),
    SdiVariant("HD-SDI", "ST 292", 1.485e9, "HD (720p @ 30 fps)"),
    SdiVariant("HD-SDI", "ST 292", 1.485e9, "HD (1080i @ 25 fps)"),
    SdiVariant("3G-SDI", "ST 424", 2.97e9, "FHD (1080p @ 50 fps)"),
    SdiVariant("3G-SDI", "ST 424", 2.97e9, "FHD (1080p @ 60 fps)"),
    SdiVariant("6G-SDI", "ST 2081", 5.94e9, "4K UHD (2160p @ 30 fps)"),
    SdiVariant("12G-SDI", "ST 2082", 11.88e9, "4K UHD (2160p @ 60 fps)"),
    SdiVariant("24G-SDI", "ST 2083", 23.76e9, "4K UHD (2160p @ 120 fps)"),
    SdiVariant("24G-SDI", "ST 2083", 23.76e9, "8K UHD (4320p @ 30 fps)"),
)


def variant_lookup(key):
    """All table rows matching a variant name or an exact data rate.

    Returns
    -------
    list of SdiVariant
        One row per video format carried by the variant.

    Raises
    ------
    NotFoundError
        If nothing matches.
    """
    if isinstance(key, str):
        rows = [v for v in SDI_VARIANTS if v.name.lower() == key.strip().lower()]
    else:
        rate = float(key)
        rows = [v for v in SDI_VARIANTS if math.isclose(v.data_rate_bps, rate, rel_tol=1e-12)]
    if not rows:
        raise NotFoundError(f"no SDI variant matches {key!r}")
    return rows


def variants_csv():
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["variant", "standard", "data_rate_bps", "video_format"])
    for v in SDI_VARIANTS:
        out.writerow([v.name, v.standard, repr(v.data_rate_bps), v.video_format])
    return buf.getvalue()


def min_bandwidth(bit_rate, headroom_factor=NYQUIST_FACTOR):
    """Baseband bandwidth ``headroom_factor * bit_rate`` (Hz)."""
    if not bit_rate > 0:
        raise InvalidArgumentError("bit_rate must be positive")
    if headroom_factor < NYQUIST_FACTOR:
        raise InvalidArgumentError(f"headroom_factor {headroom_factor} is below Nyquist (0.5)")
    return headroom_factor * bit_rate


def q_to_ber(q):
    """``0.5 * erfc(q / sqrt(2))``."""
    if not q > 0:
        raise InvalidArgumentError(f"q must be positive, got {q}")
    return float(0.5 * special.erfc(q / math.sqrt(2.0)))


def q_to_snr_db(q):
    """SNR = Q**2, in dB: ``20 log10 q``."""
    if not q > 0:
        raise InvalidArgumentError(f"q must be positive, got {q}")
    return 20.0 * math.log10(q)


def ber_to_q(ber, rtol=1e-12):
    """Invert :func:`q_to_ber` by bisection on ``log(BER)``."""
    if not 0 < ber < 0.5:
        raise InvalidArgumentError(f"ber must lie in (0, 0.5), got {ber}")
    target = math.log(ber)
    hi = 1.0
    while math.log(q_to_ber(hi)) > target:
        hi *= 2.0
        if hi > 1e3:
            raise InvalidArgumentError(f"ber {ber} is too small to invert")
    return optimize.bisect(lambda q: math.log(q_to_ber(q)) - target, 1e-12, hi,
                           xtol=1e-15, rtol=rtol, maxiter=500)


@dataclass(frozen=True)
class CrashKneeTarget:
    name: str
    ber: float
    q_threshold: float
    cable_length_m: float  # informational: HD-SDI reach at this target


#: Error-rate targets, thresholds stored at their rounded published values.
CRASH_KNEE_TARGETS = {
    "per_second": CrashKneeTarget("1 error per second", 4.7e-9, 5.7, 188.0),
    "per_hour": CrashKneeTarget("1 error per hour", 1.3e-12, 7.0, 182.0),
}


@dataclass(frozen=True)
class CrashKneeVerdict:
    passed: bool
    measured_q: float
    threshold_q: float
    exact_threshold_q: float
    target_ber: float
    margin_db: float
    cable_length_m: float


def crash_knee_check(measured_q, target="per_hour"):
    """Pass iff ``measured_q`` reaches the target's Q threshold.

    ``margin_db = 20 log10(measured_q / threshold)``. The exact inversion of
    the target BER is reported alongside the rounded threshold.
    """
    if measured_q < 0:
        raise InvalidArgumentError("measured_q must be >= 0")
    try:
        t = CRASH_KNEE_TARGETS[target]
    except KeyError:
        raise NotFoundError(f"unknown target {target!r}") from None
    margin = 20.0 * math.log10(measured_q / t.q_threshold) if measured_q > 0 else -math.inf
    return CrashKneeVerdict(
        passed=measured_q >= t.q_threshold,
        measured_q=measured_q,
        threshold_q=t.q_threshold,
        exact_threshold_q=ber_to_q(t.ber),
        target_ber=t.ber,
        margin_db=margin,
        cable_length_m=t.cable_length_m,
    )
