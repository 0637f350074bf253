"""Command-line front end: ``owlink simulate|latency|budget|codec|convert``.

Exit status: 0 when every requested check passes, 1 when a check fails or
the signal is degraded, 2 for unreadable input or invalid arguments.
"""

import argparse
import datetime
import json
import math
import os
import platform
import sys
from pathlib import Path

from . import __version__, analysis, budget, codec, latency
from .channel import EYE_STAGE, run_chain
from .config import all_keys, load_scenario, parse_value
from .errors import (ConfigError, DegradedSignalError, InvalidArgumentError,
                     LowConfidenceError, NotFoundError)
from .waveform import read_csv, read_waveform, resample, write_csv, write_waveform

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MASK_STAGE = "ceq_output"


def _err(msg):
    print(f"owlink: error: {msg}", file=sys.stderr)


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False))
        fh.write("\n")


def _finite(x):
    return x if isinstance(x, float) and math.isfinite(x) else None


# --- simulate ---------------------------------------------------------------------

def _source_bits(sc):
    if sc.source == "prbs15":
        return codec.prbs15(sc.n_bits, sc.bit_rate)
    if sc.source == "prbs7":
        return codec.generate_prbs(codec.LfsrSpec.prbs(7), sc.n_bits, sc.bit_rate)
    stream = codec.read_bits(sc.source)
    return codec.BitStream(stream.bits[:sc.n_bits], sc.bit_rate)


def _ber_estimate(q):
    return budget.q_to_ber(q) if q is not None and q > 0 else None


def simulate(sc, out_dir):
    """Run a scenario and write its artifacts; returns (exit code, report)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": {"name": sc.name, "source": sc.source, "n_bits": sc.n_bits,
                     "bit_rate_bps": sc.bit_rate, "analyses": list(sc.analyses),
                     "seed": sc.seed},
        "link": sc.link.to_flat(),
        "checks": {},
    }
    checks = report["checks"]
    try:
        bits = _source_bits(sc)
        trace = run_chain(bits, sc.link, sc.pulse)
    except DegradedSignalError as exc:
        q = _finite(float(exc.q_factor))
        report["degraded"] = {"message": str(exc), "q_factor": q,
                              "ber_est": _ber_estimate(q)}
        for name in sc.analyses:
            checks[name] = False
        _write_json(out / "report.json", report)
        return EXIT_FAIL, report

    ui = trace.ui
    report["group_delay_s"] = trace.stage_delays
    q = None
    if "eye" in sc.analyses or "ber" in sc.analyses:
        try:
            eye = analysis.build_eye(trace.eye_waveform, ui)
            metrics = analysis.q_factor(eye)
            q = metrics.q_factor
            report["eye"] = dict(metrics.to_dict(), stage=EYE_STAGE)
            eye.to_csv(out / "eye.csv")
            eye.to_svg(out / "eye.svg", nominal_vpp=0.0)
        except DegradedSignalError as exc:
            q = _finite(float(exc.q_factor))
            report["eye"] = {"stage": EYE_STAGE, "degraded": str(exc), "q_factor": q,
                             "ber_est": _ber_estimate(q)}
    if "eye" in sc.analyses:
        if q is not None and q > 0:
            verdict = budget.crash_knee_check(q, "per_hour")
            report["crash_knee"] = {k: _finite(float(v)) if isinstance(v, float) else v
                                    for k, v in vars(verdict).items()}
            checks["eye"] = verdict.passed
        else:
            checks["eye"] = False
    if "mask" in sc.analyses:
        w = trace.stages[MASK_STAGE]
        try:
            m, edges = analysis.waveform_metrics(w, ui)
            rep = analysis.mask_check(m, edges)
        except (DegradedSignalError, InvalidArgumentError) as exc:
            rep = None
            report["mask"] = {"stage": MASK_STAGE, "error": str(exc)}
        if rep is not None:
            report["mask"] = dict(rep.to_dict(), stage=MASK_STAGE)
        checks["mask"] = bool(rep is not None and rep.passed)
    if "ber" in sc.analyses:
        e = trace.errors
        report["bit_errors"] = {"errors": e.errors, "compared": e.overlap,
                                "counted_ber": e.ber, "offset": e.offset,
                                "ber_est_from_q": _ber_estimate(q)}
        checks["ber"] = e.errors == 0
    if "latency" in sc.analyses:
        ref_stage = "splitter" if "splitter" in trace.stages else "source"
        x = trace.stages[ref_stage].delayed(sc.link.cable_delay_s)
        y = trace.stages["ceq_input"]
        try:
            lat = latency.measure_latency(x, y, sc.link.cable_delay_s, trace.ceq.latency_s,
                                          sc.max_lag_s)
            report["latency"] = lat.to_dict()
            checks["latency"] = True
        except LowConfidenceError as exc:
            report["latency"] = {"error": str(exc), "tau_d_s": exc.tau_d_s,
                                 "correlation_peak": exc.correlation_peak}
            checks["latency"] = False

    if sc.write_waveforms:
        wdir = out / "waveforms"
        wdir.mkdir(exist_ok=True)
        for name, w in trace.stages.items():
            write_waveform(wdir / f"{name}.owlwav", w)
        codec.write_bits(wdir / "tx.owlbits", bits)
        codec.write_bits(wdir / "rx.owlbits", trace.recovered)

    report["passed"] = all(checks.values())
    _write_json(out / "report.json", report)
    return (EXIT_OK if report["passed"] else EXIT_FAIL), report


def _write_metadata(out_dir, argv):
    meta = {
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "owlink_version": __version__,
        "python": platform.python_version(),
        "argv": list(argv),
    }
    _write_json(Path(out_dir) / "metadata.json", meta)


def cmd_simulate(args):
    overrides = {k: v for k, v in vars(args).get("overrides", {}).items()}
    sc = load_scenario(args.config, overrides)
    out_dir = args.out or sc.output_dir
    code, report = simulate(sc, out_dir)
    _write_metadata(out_dir, args.argv)
    status = "PASS" if code == EXIT_OK else "FAIL"
    checks = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in report["checks"].items())
    print(f"{sc.name}: {status} ({checks}) -> {Path(out_dir) / 'report.json'}")
    eye = report.get("eye") or report.get("degraded") or {}
    if eye.get("q_factor") is not None:
        print(f"  Q = {eye['q_factor']:.2f}, BER est = {eye.get('ber_est')}")
    if "bit_errors" in report:
        be = report["bit_errors"]
        print(f"  bit errors: {be['errors']} / {be['compared']}")
    return code


# --- latency --------------------------------------------------------------------

def _read_any(path):
    if str(path).lower().endswith(".csv"):
        return read_csv(path)
    return read_waveform(path)


def cmd_latency(args):
    a = read_waveform(args.capture_a)
    b = read_waveform(args.capture_b)
    try:
        rep = latency.measure_latency(a, b, args.tau_bb, args.ceq_latency, args.max_lag,
                                      subsample=args.subsample)
    except LowConfidenceError as exc:
        print(f"low confidence: correlation peak {exc.correlation_peak:.4f} "
              f"(best tau_d = {exc.tau_d_s * 1e9:.4f} ns)")
        return EXIT_FAIL
    text = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    print(f"tau_d   = {rep.tau_d_s * 1e9:10.4f} ns  (peak {rep.correlation_peak:.4f})")
    print(f"tau_bb  = {rep.tau_bb_s * 1e9:10.4f} ns")
    print(f"tau_ow  = {rep.tau_ow_s * 1e9:10.4f} ns")
    print(f"ceq     = {rep.ceq_latency_s * 1e9:10.4f} ns")
    print(f"tau_sdi = {rep.tau_sdi_s * 1e9:10.4f} ns")
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


# --- budget ---------------------------------------------------------------------

def cmd_budget(args):
    rows = budget.variant_lookup(args.bit_rate)
    bw = budget.min_bandwidth(args.bit_rate, args.headroom)
    print(f"bit rate      {args.bit_rate / 1e9:g} Gb/s")
    print(f"UI            {1e12 / args.bit_rate:.1f} ps")
    print(f"min bandwidth {bw / 1e9:.4g} GHz (headroom {args.headroom:g})")
    print()
    print(f"{'variant':<9} {'standard':<9} {'rate (Gb/s)':>11}  video format")
    for r in rows:
        print(f"{r.name:<9} {r.standard:<9} {r.data_rate_bps / 1e9:>11g}  {r.video_format}")
    t = budget.CRASH_KNEE_TARGETS[args.target]
    print()
    print(f"target {t.name}: BER {t.ber:g}, Q >= {t.q_threshold:g} "
          f"(SNR {budget.q_to_snr_db(t.q_threshold):.1f} dB; exact Q {budget.ber_to_q(t.ber):.3f})")
    if args.q is not None:
        v = budget.crash_knee_check(args.q, args.target)
        print(f"measured Q {args.q:g}: {'pass' if v.passed else 'fail'}, margin {v.margin_db:+.2f} dB")
    return EXIT_OK


# --- codec ----------------------------------------------------------------------

def cmd_codec(args):
    if args.action == "prbs":
        spec = codec.LfsrSpec.prbs(args.order)
        stream = codec.generate_prbs(spec, args.n_bits, args.bit_rate)
        codec.write_bits(args.output, stream)
        print(f"wrote {len(stream)} bits of PRBS{args.order} to {args.output}")
        return EXIT_OK
    stream = codec.read_bits(args.input)
    fn = {"scramble": codec.scramble, "descramble": codec.descramble}[args.action]
    result = fn(stream)
    codec.write_bits(args.output, result)
    print(f"{args.action}d {len(result)} bits -> {args.output}")
    return EXIT_OK


# --- convert --------------------------------------------------------------------

def cmd_convert(args):
    w = _read_any(args.input)
    if args.sample_rate:
        w = resample(w, args.sample_rate)
    if str(args.output).lower().endswith(".csv"):
        write_csv(args.output, w)
    else:
        write_waveform(args.output, w)
    print(f"{args.input} -> {args.output}: {w.samples.size} samples at {w.sample_rate:g} Sa/s")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

class _Override(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        store = getattr(namespace, "overrides", None)
        if store is None:
            store = {}
            setattr(namespace, "overrides", store)
        store[self.metavar] = parse_value(values)


def build_parser():
    p = argparse.ArgumentParser(prog="owlink", description="SDI over optical wireless link simulator")
    p.add_argument("--version", action="version", version=f"owlink {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario file")
    s.add_argument("config", help="scenario file (dotted key = value)")
    s.add_argument("--out", help="output directory (default: scenario.output_dir)")
    keys = s.add_argument_group("config overrides (flag > file > preset)")
    for key in all_keys():
        keys.add_argument(f"--{key}", metavar=key, action=_Override, dest=f"_ov_{key}",
                          help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_simulate, overrides={})

    l = sub.add_parser("latency", help="delay between two OWLWAV1 captures")
    l.add_argument("capture_a", help="reference capture")
    l.add_argument("capture_b", help="received capture")
    l.add_argument("--tau-bb", type=float, default=12.18e-9, help="reference path delay, s")
    l.add_argument("--ceq-latency", type=float, default=14e-9, help="equalizer latency, s")
    l.add_argument("--max-lag", type=float, default=50e-9, help="largest lag searched, s")
    l.add_argument("--subsample", action="store_true", help="parabolic peak refinement")
    l.add_argument("--out", help="write the report as JSON")
    l.set_defaults(func=cmd_latency)

    b = sub.add_parser("budget", help="bandwidth, thresholds and Table I row")
    b.add_argument("bit_rate", type=float)
    b.add_argument("--headroom", type=float, default=0.5)
    b.add_argument("--target", choices=sorted(budget.CRASH_KNEE_TARGETS), default="per_hour")
    b.add_argument("--q", type=float, help="measured Q to check against the target")
    b.set_defaults(func=cmd_budget)

    c = sub.add_parser("codec", help="PRBS generation and scrambling of OWLBITS files")
    csub = c.add_subparsers(dest="action", required=True)
    g = csub.add_parser("prbs")
    g.add_argument("output")
    g.add_argument("--order", type=int, default=15)
    g.add_argument("--n-bits", type=int, default=32767)
    g.add_argument("--bit-rate", type=float, default=2.97e9)
    for name in ("scramble", "descramble"):
        a = csub.add_parser(name)
        a.add_argument("input")
        a.add_argument("output")
    c.set_defaults(func=cmd_codec)

    v = sub.add_parser("convert", help="convert between OWLWAV1 and CSV, optionally resampling")
    v.add_argument("input")
    v.add_argument("output")
    v.add_argument("--sample-rate", type=float, help="resample to this rate, Sa/s")
    v.set_defaults(func=cmd_convert)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    args.argv = argv
    try:
        return args.func(args)
    except ConfigError as exc:
        loc = exc.location()
        _err(f"{loc + ': ' if loc else ''}{exc}")
        return EXIT_USAGE
    except (NotFoundError, InvalidArgumentError, OSError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
