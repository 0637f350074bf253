"""Bisect the receiver noise level so the default 2.97 Gb/s eye has Q ~ 27.4.

Usage: python3 scripts/calibrate_noise.py [--bits N] [--target Q]

Prints the calibrated ``noise_sigma_v``; copy it into
``src/owlink/presets/paper-3g.cfg`` and ``channel.CALIBRATED_NOISE_SIGMA_V``.
"""

import argparse
import dataclasses

from scipy import optimize

from owlink import LinkConfig, prbs15, run_chain
from owlink.analysis import build_eye, q_factor


def measured_q(sigma, n_bits, bit_rate=2.97e9):
    cfg = dataclasses.replace(LinkConfig(), noise_sigma_v=sigma)
    trace = run_chain(prbs15(n_bits, bit_rate), cfg)
    return q_factor(build_eye(trace.eye_waveform, trace.ui)).q_factor


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", type=int, default=200_000)
    ap.add_argument("--target", type=float, default=27.4)
    ap.add_argument("--hi", type=float, default=0.05)
    args = ap.parse_args(argv)

    def f(sigma):
        q = measured_q(sigma, args.bits)
        print(f"  sigma = {sigma:.5f} V -> Q = {q:.3f}")
        return q - args.target

    sigma = optimize.brentq(f, 0.0, args.hi, xtol=2e-4)
    sigma = round(sigma, 4)
    q = measured_q(sigma, 1_000_000)
    print(f"noise_sigma_v = {sigma}  (Q at 10^6 bits: {q:.2f})")


if __name__ == "__main__":
    main()
