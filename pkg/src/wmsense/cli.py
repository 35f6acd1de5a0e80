"""Command-line entry point: ``wmsense {synth,train,detect,bench,diagnose}``.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .calibrate import NoiseProfile, ThresholdTable, build_noise_profile, calibrate_thresholds, \
    compute_test_statistics, whiten
from .capture import ingest_capture, write_capture
from .core_dsp import SampleBuffer, estimate_autocorr, noise_diagnostics
from .detector import detect
from .exceptions import ConfigError, WmSenseError
from .harness import BenchConfig, run_bench
from .synth import SynthConfig, gen_colored_noise, synthesize

log = logging.getLogger("wmsense")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_json(path):
    return json.loads(Path(path).read_text())


def cmd_synth(args) -> int:
    cfg = SynthConfig.from_dict(_load_json(args.config)) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name or ("noise.f32" if args.noise_only else "synth.f32")
    buf = synthesize(cfg, noise_only=args.noise_only)
    write_capture(buf, out / name)
    (out / (name + ".config.json")).write_text(cfg.to_json() + "\n")
    print(out / name)
    return EXIT_OK


def _segments(bufs, length):
    for b in bufs:
        for k in range(len(b) // length):
            yield SampleBuffer(b.samples[k * length:(k + 1) * length], b.sample_rate_hz, b.origin)


def cmd_train(args) -> int:
    noise_sets = [ingest_capture(p) for p in args.noise_files]
    profile = build_noise_profile(noise_sets, args.L)
    fs = profile.sample_rate_hz
    if args.calibration == "segments":
        length = args.segment_length
        cal = list(_segments(noise_sets, length))
    else:
        seed = 0 if args.seed is None else args.seed
        length = args.segment_length
        cal = (gen_colored_noise(fs, length, np.random.SeedSequence(seed, spawn_key=(i,)))
               for i in range(args.trials))
    stats = [compute_test_statistics(whiten(estimate_autocorr(b, args.L), profile)) for b in cal]
    grid = [float(s) for s in args.snr_grid] if args.snr_grid else None
    table = calibrate_thresholds(stats, None, args.target_pfa, snr_grid=grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "profile.json").write_text(profile.to_json() + "\n")
    (out / "thresholds.json").write_text(table.to_json())
    print(out / "thresholds.json")
    return EXIT_OK


def cmd_detect(args) -> int:
    profile = NoiseProfile.from_dict(_load_json(args.profile))
    table = ThresholdTable.from_dict(_load_json(args.thresholds))
    buf = ingest_capture(args.capture)
    report = detect(buf, profile, table, snr_db=args.snr_db)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.psd_csv and report.psd is not None:
            psd_path = out / "psd_0.csv"
            report.psd.to_csv(psd_path)
            report = dataclasses.replace(report, psd_csv_path=str(psd_path))
        (out / "report.json").write_text(report.to_json() + "\n")
    print(report.to_json())
    return EXIT_OK


def cmd_bench(args) -> int:
    d = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        d["master_seed"] = args.seed
    cfg = BenchConfig.from_dict(d)
    tables = profiles = None
    if args.thresholds or args.profile:
        if len(cfg.l_grid) != 1:
            raise ConfigError("--thresholds/--profile need a single-entry l_grid")
        (L,) = cfg.l_grid
        if args.thresholds:
            tables = {L: ThresholdTable.from_dict(_load_json(args.thresholds))}
        if args.profile:
            profiles = {L: NoiseProfile.from_dict(_load_json(args.profile))}
    out = Path(args.out)
    result = run_bench(cfg, tables, threads=args.threads, psd_dir=out if args.psd else None,
                       psd_trials=args.psd, profiles=profiles)
    paths = result.write(out)
    print(paths["summary"])
    return EXIT_OK


def cmd_diagnose(args) -> int:
    buf = ingest_capture(args.capture)
    rep = noise_diagnostics(buf, args.window)
    print(json.dumps(rep.to_dict(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wmsense", description="Subspace detector for FM wireless-microphone signals.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic capture from a SynthConfig JSON")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--name")
    s.add_argument("--noise-only", action="store_true")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="noise captures -> profile.json + thresholds.json")
    t.add_argument("noise_files", nargs="+")
    t.add_argument("--out", required=True)
    t.add_argument("--L", type=int, default=500)
    t.add_argument("--seed", type=int)
    t.add_argument("--target-pfa", type=float, default=0.1)
    t.add_argument("--calibration", choices=["synthetic", "segments"], default="synthetic",
                   help="H0 trials from the band-limited generator or from slicing the noise files")
    t.add_argument("--trials", type=int, default=500)
    t.add_argument("--segment-length", type=int, default=20000)
    t.add_argument("--snr-grid", type=float, nargs="+")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("detect", help="run detection on one capture")
    d.add_argument("capture")
    d.add_argument("--profile", required=True)
    d.add_argument("--thresholds", required=True)
    d.add_argument("--snr-db", type=float)
    d.add_argument("--out")
    d.add_argument("--psd-csv", action="store_true")
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("bench", help="Monte Carlo Pd/Pfa benchmark")
    b.add_argument("--config")
    b.add_argument("--seed", type=int)
    b.add_argument("--out", required=True)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--thresholds", help="ThresholdTable JSON to use instead of in-run calibration")
    b.add_argument("--profile", help="NoiseProfile JSON to use instead of the synthetic one")
    b.add_argument("--psd", type=int, default=0, metavar="N", help="write PSD CSVs for the first N signal trials")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("diagnose", help="noise stationarity and correlation report")
    g.add_argument("capture")
    g.add_argument("--window", type=int, default=1000)
    g.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (WmSenseError, ValueError, OSError, KeyError, TypeError) as e:
        print(f"wmsense {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
