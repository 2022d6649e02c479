"""Command line front end.

Every subcommand takes ``--config``, ``--seed``, ``--out`` and ``--format``;
results go to the output directory and a ``key: value`` summary to stdout.
Failures print one JSON line ``{"error": <code>, "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import BiphotonError, ParseError, CoverageError, ValidationError
from .fileio import (
    FORMATS, RunConfig, ensure_dir, format_report, load_config, read_record, save_config,
    write_amplitude, write_histogram, write_matrix, write_pgm, write_record, write_report,
)
from .instruments import simulate_dfg, simulate_spdc, spdc_resolution
from .pipeline import end_to_end_recovery, fringe_metrics, theory_summary
from .schmidt import analyze_record, crop_frame, k_min, total_intensity
from .spectral import assemble_jsa, tuning_table


def _formats(value: str) -> tuple[str, ...]:
    items = tuple(v.strip() for v in value.split(",") if v.strip())
    bad = [v for v in items if v not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {', '.join(FORMATS)}")
    return items


def _u64(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON); defaults to the shipped reference set-up")
    common.add_argument("--seed", type=_u64, help="RNG seed overriding the config")
    common.add_argument("--out", help="output directory overriding the config")
    common.add_argument("--format", type=_formats, dest="formats",
                        help="comma-separated export formats: csv, pgm, json")

    parser = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"biphoton {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("model", parents=[common], help="theoretical JSA/JSD with K and K_min")

    p = sub.add_parser("tune", parents=[common], help="tuning-curve table over a pump-angle range")
    p.add_argument("--theta-min", type=float, default=0.5, help="degrees")
    p.add_argument("--theta-max", type=float, default=1.5, help="degrees")
    p.add_argument("--steps", type=int, default=11)

    p = sub.add_parser("spdc", parents=[common], help="coincidence-histogram simulation")
    p.add_argument("--pulses", type=int, help="pump pulses (default: config, 120 min at 3.8 MHz)")

    sub.add_parser("dfg", parents=[common], help="seed-sweep simulation")

    p = sub.add_parser("analyze", parents=[common], help="condition a DFG record and report K_min")
    p.add_argument("record", help="intensity matrix CSV")
    p.add_argument("--transmittance", help="per-step vector CSV (T, P_ref)")
    p.add_argument("--crop", type=float, help="frame width in nm (overrides the config pipeline)")
    p.add_argument("--bin", type=int, nargs=2, metavar=("BX", "BY"), help="binning (overrides the config pipeline)")

    p = sub.add_parser("replicate", parents=[common], help="full SPDC vs DFG comparison with the reference defaults")
    p.add_argument("--pulses", type=int)
    return parser


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, instrument=replace(cfg.instrument, rng_seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, output=args.out)
    if args.formats is not None:
        cfg = replace(cfg, formats=args.formats)
    return cfg


def _provenance(cfg: RunConfig) -> dict:
    return {"config_sha256": cfg.sha256(), "seed": cfg.instrument.rng_seed}


def _export_density(out, name, values, grid, cfg, kind):
    prov = _provenance(cfg)
    if "csv" in cfg.formats:
        write_matrix(out / f"{name}.csv", values, grid, kind, prov)
    if "pgm" in cfg.formats:
        write_pgm(out / f"{name}.pgm", values)


def cmd_model(args, cfg: RunConfig) -> dict:
    out = ensure_dir(cfg.output)
    amp = assemble_jsa(cfg.source, cfg.grid, "full_phase", estimate_emission=True)
    report = theory_summary(amp)
    report["fringes"] = fringe_metrics(amp.jsd(), cfg.grid, cfg.source)
    if "csv" in cfg.formats:
        write_amplitude(out / "jsa", amp, _provenance(cfg))
    _export_density(out, "jsd", amp.jsd(), cfg.grid, cfg, "jsd")
    return {"model": report}


def cmd_tune(args, cfg: RunConfig) -> dict:
    if args.steps < 1:
        raise ValidationError("--steps must be positive")
    rows = tuning_table(cfg.source, math.radians(args.theta_min), math.radians(args.theta_max), args.steps)
    out = ensure_dir(cfg.output)
    lines = ["# tool: biphoton " + __version__, f"# config_sha256: {cfg.sha256()}",
             "theta_deg,lambda_signal_nm,lambda_idler_nm"]
    lines += [f"{math.degrees(t)!r},{l1!r},{l2!r}" for t, l1, l2 in rows]
    (out / "tuning.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("theta_deg\tlambda_signal_nm\tlambda_idler_nm")
    for t, l1, l2 in rows:
        print(f"{math.degrees(t):.4f}\t{l1:.4f}\t{l2:.4f}")
    return {}


def cmd_spdc(args, cfg: RunConfig) -> dict:
    out = ensure_dir(cfg.output)
    amp = assemble_jsa(cfg.source, cfg.grid)
    hist = simulate_spdc(amp, cfg.instrument, args.pulses)
    if "csv" in cfg.formats:
        write_histogram(out / "coincidences.csv", hist, _provenance(cfg))
    if "pgm" in cfg.formats:
        write_pgm(out / "coincidences.pgm", hist.counts)
    report = {
        "shape": list(hist.grid.shape),
        "pitch_nm": hist.grid.axis1_pitch,
        "resolution_nm": spdc_resolution(cfg.instrument),
        "pulses": hist.pulses_simulated,
        "coincidences": hist.total,
    }
    if hist.total:
        report["K_min"] = k_min(np.sqrt(hist.counts.astype(float)))
    return {"spdc": report}


def cmd_dfg(args, cfg: RunConfig) -> dict:
    out = ensure_dir(cfg.output)
    amp = assemble_jsa(cfg.source, cfg.grid)
    rec = simulate_dfg(amp, cfg.instrument)
    if "csv" in cfg.formats:
        write_record(out / "dfg", rec, _provenance(cfg))
    if "pgm" in cfg.formats:
        write_pgm(out / "dfg.pgm", rec.intensity)
    return {"dfg": {"shape": list(rec.grid.shape),
                    "pitch_nm": [rec.grid.axis1_pitch, rec.grid.axis2_pitch],
                    "flagged_steps": int(rec.flagged.sum())}}


def cmd_analyze(args, cfg: RunConfig) -> dict:
    try:
        rec = read_record(args.record, args.transmittance)
    except ParseError as exc:
        if "missing payload" in str(exc):
            raise CoverageError(f"coverage failure: no data to analyze ({exc})") from None
        raise
    if args.crop is not None or args.bin is not None:
        steps = []
        if args.crop:
            steps.append({"crop": args.crop})
        if args.bin:
            steps.append({"bin": list(args.bin)})
    else:
        steps = cfg.pipeline
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = analyze_record(rec, steps)
    report = result.to_dict()
    report["warnings"] = [str(w.message) for w in caught]
    return {"analysis": report}


def cmd_replicate(args, cfg: RunConfig) -> dict:
    out = ensure_dir(cfg.output)
    rep = end_to_end_recovery(cfg.source, cfg.instrument, cfg.grid, cfg.pipeline, args.pulses)
    prov = _provenance(cfg)
    for name, (values, grid) in ((k, rep.jsd[k]) for k in ("theory", "dfg", "spdc")):
        _export_density(out, f"jsd_{name}", values, grid, cfg, f"jsd_{name}")
    if "csv" in cfg.formats:
        write_amplitude(out / "jsa", rep.jsd["amplitude"], prov)
        write_record(out / "dfg", rep.jsd["record"], prov)
    save_config(out / "config_used.json", cfg)
    return rep.to_dict()


COMMANDS = {
    "model": cmd_model, "tune": cmd_tune, "spdc": cmd_spdc, "dfg": cmd_dfg,
    "analyze": cmd_analyze, "replicate": cmd_replicate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        report = COMMANDS[args.command](args, cfg)
        if report:
            out = ensure_dir(cfg.output)
            write_report(out, f"{args.command}_report", report, _provenance(cfg), cfg.formats)
            print("\n".join(format_report(report)))
    except BiphotonError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
