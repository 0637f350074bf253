"""Estimate link latency from a pair of captured waveforms.

Two 1 us captures at 32 GSa/s are synthesized, the second delayed by the
relative delay between the optical path and a back-to-back cable. Cross
correlation recovers that delay, which is then combined with the reference
cable delay and the equalizer latency.

    python demos/latency_measurement.py [out_dir]
"""

import sys
from pathlib import Path

from owlink import codec
from owlink.latency import conversion_delay_estimate, cross_correlate, measure_latency
from owlink.waveform import PulseSpec, Waveform, synthesize

FS = 32e9
N = 32001


def main(out_dir="demo_out"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = PulseSpec.nominal(2.97e9)
    levels = codec.nrzi_encode(codec.scramble(codec.prbs15(3200)))
    x = synthesize(levels, spec, FS)
    y = synthesize(levels, spec, FS, delay_s=8.56e-9)
    x, y = Waveform(x.samples[:N], FS), Waveform(y.samples[:N], FS)

    report = measure_latency(x, y, tau_bb_s=12.18e-9, ceq_latency_s=14e-9, max_lag_s=20e-9)
    cross_correlate(x, y, max_lag_s=20e-9).to_csv(out / "correlation.csv")
    print(f"tau_d   {report.tau_d_s * 1e9:7.3f} ns  (peak {report.correlation_peak:.3f})")
    print(f"tau_bb  {report.tau_bb_s * 1e9:7.3f} ns")
    print(f"tau_ow  {report.tau_ow_s * 1e9:7.3f} ns")
    print(f"CEQ     {report.ceq_latency_s * 1e9:7.3f} ns")
    print(f"tau_SDI {report.tau_sdi_s * 1e9:7.3f} ns")

    lo, hi = conversion_delay_estimate(60, 1125, (5, 10))
    print(f"\nSDI to HDMI conversion at 1080p60, 5 to 10 lines: "
          f"{lo * 1e6:.2f} to {hi * 1e6:.2f} us")
    print(f"link latency is {report.tau_sdi_s / lo:.1e} of the lower bound")


if __name__ == "__main__":
    main(*sys.argv[1:])
