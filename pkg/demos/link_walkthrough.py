"""Follow a PRBS15 test stream through every stage of the optical link.

Prints the signal swing and DC level at each stage, the decoded bit-error
count, and the eye metrics at the equalizer. Run from the repository root:

    python demos/link_walkthrough.py [out_dir]
"""

import sys
from pathlib import Path

from owlink import LinkConfig, prbs15, run_chain
from owlink.analysis import build_eye, q_factor
from owlink.channel import EYE_STAGE


def main(out_dir="demo_out"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = LinkConfig()
    trace = run_chain(prbs15(50_000, 2.97e9), cfg)

    print(f"{'stage':<15}{'unit':>5}{'p-p':>12}{'mean':>12}")
    for name, w in trace.stages.items():
        s = w.samples
        print(f"{name:<15}{w.unit:>5}{s.max() - s.min():>12.4g}{s.mean():>12.4g}")

    print(f"\nbit errors: {trace.errors.errors} of {trace.errors.overlap} compared "
          f"(alignment offset {trace.errors.offset})")
    print(f"group delay: {trace.group_delay_s * 1e9:.2f} ns")
    for k, v in trace.stage_delays.items():
        print(f"  {k:<14}{v * 1e9:8.3f} ns")

    eye = build_eye(trace.eye_waveform, trace.ui)
    m = q_factor(eye)
    print(f"\neye at {EYE_STAGE}: Q = {m.q_factor:.2f}, "
          f"SNR = {m.snr_db:.2f} dB, BER est = {m.ber_est:.2e}")
    eye.to_svg(out / "walkthrough_eye.svg", nominal_vpp=m.v_high_mean - m.v_low_mean)
    print(f"eye written to {out / 'walkthrough_eye.svg'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
