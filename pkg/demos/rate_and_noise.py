"""Compare 3G and 6G SDI over the same link, then sweep receiver noise.

Doubling the bit rate against a fixed receiver bandwidth closes the eye;
raising the noise floor walks the link toward the crash knee.

    python demos/rate_and_noise.py
"""

import dataclasses

from owlink import LinkConfig, prbs15, run_chain
from owlink.analysis import build_eye, q_factor
from owlink.budget import crash_knee_check


def eye_q(bits, cfg):
    tr = run_chain(bits, cfg)
    m = q_factor(build_eye(tr.eye_waveform, tr.ui))
    return tr, m


def main():
    cfg = LinkConfig()
    print("rate       Q      SNR dB  opening V  errors")
    for rate in (2.97e9, 5.94e9):
        tr, m = eye_q(prbs15(100_000, rate), cfg)
        print(f"{rate / 1e9:4.2f}G  {m.q_factor:6.2f}  {m.snr_db:7.2f}  "
              f"{m.vertical_opening_v:9.4f}  {tr.errors.errors:6d}")

    print("\nnoise sweep at 2.97 Gb/s")
    print("sigma V    Q      verdict   margin dB  errors")
    bits = prbs15(100_000, 2.97e9)
    for scale in (1, 5, 10, 20, 30):
        sigma = cfg.noise_sigma_v * scale
        tr, m = eye_q(bits, dataclasses.replace(cfg, noise_sigma_v=sigma))
        v = crash_knee_check(m.q_factor)
        print(f"{sigma:7.4f}  {m.q_factor:6.2f}  {'pass' if v.passed else 'FAIL':>7}  "
              f"{v.margin_db:9.2f}  {tr.errors.errors:6d}")


if __name__ == "__main__":
    main()
