"""Bandwidth and Q/BER arithmetic for the SDI family.

    python demos/budget_tables.py
"""

from owlink.budget import (CRASH_KNEE_TARGETS, SDI_VARIANTS, ber_to_q, min_bandwidth, q_to_ber,
                           q_to_snr_db)


def main():
    print(f"{'variant':<10}{'rate Gb/s':>10}{'Nyquist GHz':>13}{'0.7x GHz':>10}")
    seen = set()
    for v in SDI_VARIANTS:
        if v.name in seen:
            continue
        seen.add(v.name)
        print(f"{v.name:<10}{v.data_rate_bps / 1e9:>10.3f}{min_bandwidth(v.data_rate_bps) / 1e9:>13.4f}"
              f"{min_bandwidth(v.data_rate_bps, 0.7) / 1e9:>10.4f}")

    print(f"\n{'Q':>6}{'SNR dB':>9}{'BER':>12}")
    for q in (5.7, 7.0, 14.22, 27.42, 32.5):
        print(f"{q:>6.2f}{q_to_snr_db(q):>9.2f}{q_to_ber(q):>12.3e}")

    print("\ncrash knee targets")
    for name, t in CRASH_KNEE_TARGETS.items():
        print(f"  {name:<11} BER {t.ber:.1e}  Q >= {t.q_threshold} "
              f"(exact {ber_to_q(t.ber):.3f})")


if __name__ == "__main__":
    main()
