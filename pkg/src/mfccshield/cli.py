"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 processing error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import kernels
from .attack import AttackConfig, EnvNoiseProfile, apply_noise, generate_noise
from .audio_io import read_wav, write_wav
from .config import merge, load_file
from .errors import MfccShieldError, ValidationError
from .evaluation import (
    BatchResult,
    ExternalProvider,
    StubProvider,
    feature_distortion,
    read_manifest,
    run_batch,
    snr_db,
)
from .mfcc import analyze
from .scheduler import SimulatedClock, WallClock, process_stream, split_chunks, write_decision_log
from .synth import speech_like

log = logging.getLogger("mfccshield")

EXIT_OK, EXIT_USAGE, EXIT_PROCESSING = 0, 2, 3


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML/JSON config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--dump-dir", default=argparse.SUPPRESS, help="write per-stage CSV matrices here")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    return common


def _attack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int)
    p.add_argument("--t-adv", type=float, dest="t_adv_scale")
    p.add_argument("--step-size", type=float)
    p.add_argument("--mode", choices=["away-from-clean", "toward-target"])
    p.add_argument("--no-mask", action="store_true", help="disable psychoacoustic masking")
    p.add_argument("--env-wav", help="environment noise recording mixed in before differentiation")
    p.add_argument("--env-db", type=float, help="environment noise level (dB) when no recording is given")


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="mfccshield", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", parents=[common], help="write an adversarial copy of a WAV file")
    p.add_argument("input")
    p.add_argument("output")
    _attack_flags(p)
    p.add_argument("--trace", nargs="?", const="", help="iteration trace CSV (default: <output>.trace.csv)")
    p.add_argument("--report", help="report JSON path (default: <output>.report.json)")

    p = sub.add_parser("eval", parents=[common], help="batch evaluation from a manifest CSV")
    p.add_argument("manifest")
    p.add_argument("--out", default="eval_out", help="output directory")
    p.add_argument("--provider", choices=["none", "stub", "external"], default="none")
    p.add_argument("--stub-map", help="JSON clip_id -> transcript mapping for --provider stub")
    p.add_argument("--provider-config", help="JSON/YAML with endpoint, token_env, timeout_ms")
    p.add_argument("--workers", type=int, default=1)
    _attack_flags(p)

    p = sub.add_parser("stream", parents=[common], help="chunked real-time emulation")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--profile", help="telephone | messaging | custom name with --budget-ms")
    p.add_argument("--budget-ms", type=float)
    p.add_argument("--chunk-ms", type=float)
    p.add_argument("--simulate-clock", action="store_true")
    p.add_argument("--fixed-ms", type=float, default=302.0, help="cold-start overhead estimate")
    p.add_argument("--per-iter-ms", type=float, default=42.0, help="initial per-iteration estimate")
    p.add_argument("--log", help="decision log CSV (default: <output>.log.csv)")
    _attack_flags(p)

    p = sub.add_parser("bench", parents=[common], help="per-iteration timing on synthetic chunks")
    p.add_argument("--iterations", default="1,5,10", help="comma-separated iteration counts")
    p.add_argument("--chunk-ms", type=float, default=200.0)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--no-mask", action="store_true")
    p.add_argument("--csv", help="write results as CSV")

    p = sub.add_parser("mfcc", parents=[common], help="dump cepstral features as CSV")
    p.add_argument("input")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


# -- helpers ----------------------------------------------------------------

def _config(args):
    file_data = load_file(args.config) if getattr(args, "config", None) else {}
    overrides = {"attack": {}, "stream": {}}
    for key in ("iterations", "t_adv_scale", "step_size", "mode"):
        overrides["attack"][key] = getattr(args, key, None)
    if getattr(args, "no_mask", False):
        overrides["attack"]["use_masking"] = False
    elif "use_masking" not in file_data.get("attack", {}):
        overrides["attack"]["use_masking"] = True
    for key in ("profile", "budget_ms", "chunk_ms"):
        overrides["stream"][key] = getattr(args, key, None)
    if overrides["stream"]["budget_ms"] is not None and overrides["stream"]["profile"] is None \
            and "profile" not in file_data.get("stream", {}):
        overrides["stream"]["profile"] = "custom"
    cfg = merge(file_data, overrides)

    env_wav = getattr(args, "env_wav", None)
    env_db = getattr(args, "env_db", None)
    if env_wav or env_db is not None:
        waveform = read_wav(env_wav) if env_wav else None
        cfg.attack = replace(cfg.attack, env_profile=EnvNoiseProfile(env_db, waveform))
    return cfg


def _finite(value):
    return value if np.isfinite(value) else None


def _save_matrix(path: Path, matrix) -> None:
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", fmt="%.10g")


def _dump(dump_dir, prefix: str, trace, extra: dict | None = None) -> None:
    out = Path(dump_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, matrix in trace.stages().items():
        _save_matrix(out / f"{prefix}{name}.csv", matrix)
    for name, matrix in (extra or {}).items():
        _save_matrix(out / f"{prefix}{name}.csv", matrix)


# -- commands ---------------------------------------------------------------

def cmd_perturb(args) -> int:
    cfg = _config(args)
    buffer = read_wav(args.input)
    noise = generate_noise(buffer, cfg.mfcc, cfg.attack)
    adv = apply_noise(buffer, noise)
    write_wav(adv, args.output)

    clean_trace = analyze(buffer.samples, buffer.sample_rate, cfg.mfcc)
    adv_trace = analyze(adv.samples, adv.sample_rate, cfg.mfcc)
    report = {
        "clip_id": Path(args.input).stem,
        "feature_distortion": feature_distortion(clean_trace.coeffs, adv_trace.coeffs),
        "noise_snr_db": _finite(snr_db(buffer, adv.samples - buffer.samples)),
        "noise_peak": noise.peak,
        "iterations": noise.iterations,
        "best_iteration": noise.best_iteration,
        "masked": noise.gain_map is not None,
        "initial_cost": noise.initial_cost,
        "final_cost": noise.final_cost,
        "timings_ms": {"iterations": noise.iteration_ms, "total": float(sum(noise.iteration_ms))},
        "backend": kernels.BACKEND,
    }
    report_path = args.report or f"{args.output}.report.json"
    Path(report_path).write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report))

    if args.trace is not None:
        trace_path = args.trace or f"{args.output}.trace.csv"
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "cost", "ms"])
            for i, (value, ms) in enumerate(zip(noise.costs, noise.iteration_ms), start=1):
                writer.writerow([i, f"{value:.8g}", f"{ms:.3f}"])
    if getattr(args, "dump_dir", None):
        extra = {"noise_magnitude": np.abs(noise.spectrum)}
        if noise.gain_map is not None:
            extra["gain_map"] = noise.gain_map.gains
        _dump(args.dump_dir, "clean_", clean_trace, extra)
        _dump(args.dump_dir, "adv_", adv_trace)
    return EXIT_OK


def _provider(args):
    if args.provider == "stub":
        if not args.stub_map:
            raise ValidationError("--provider stub needs --stub-map")
        return StubProvider.from_file(args.stub_map)
    if args.provider == "external":
        if not args.provider_config:
            raise ValidationError("--provider external needs --provider-config")
        return ExternalProvider.from_config(load_provider_config(args.provider_config))
    return None


def load_provider_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: provider config must be a mapping")
    return data


def cmd_eval(args) -> int:
    cfg = _config(args)
    provider = _provider(args)
    clips = read_manifest(args.manifest)
    result: BatchResult = run_batch(clips, cfg.mfcc, cfg.attack, provider,
                                    seed=getattr(args, "seed", 0), workers=args.workers)
    result.write(args.out)
    failed = len(result.reports) - len(result.ok())
    log.info("evaluated %d clips, %d failed; results in %s", len(result.reports), failed, args.out)
    print(json.dumps({"clips": len(result.reports), "failed": failed, "means": result.means()}))
    return EXIT_OK


def cmd_stream(args) -> int:
    cfg = _config(args)
    buffer = read_wav(args.input)
    profile = cfg.profile
    clock = SimulatedClock(args.fixed_ms, args.per_iter_ms) if args.simulate_clock else WallClock()
    result = process_stream(split_chunks(buffer, profile.chunk_ms), profile, cfg.mfcc, cfg.attack,
                            clock=clock, fixed_ms=args.fixed_ms, per_iter_ms=args.per_iter_ms)
    out = result.concatenated()
    if out is not None:
        write_wav(out, args.output)
    write_decision_log(result.decisions, args.log or f"{args.output}.log.csv")
    flagged = sum(d.flagged for d in result.decisions)
    print(json.dumps({"profile": profile.name, "budget_ms": profile.budget_ms,
                      "chunks": len(result.decisions), "flagged": flagged,
                      "iterations": [d.iterations_granted for d in result.decisions]}))
    if result.error is not None:
        raise result.error
    return EXIT_OK


BENCH_COLUMNS = ("backend", "chunk_ms", "iterations", "masked", "total_ms", "fixed_ms", "per_iter_ms", "marginal_ms")


def bench_rows(iteration_counts, chunk_ms=200.0, repeats=20, masked=True, seed=0):
    """Median timings of :func:`generate_noise` on a synthetic chunk.

    ``marginal_ms`` is the summed per-iteration time, ``fixed_ms`` the rest
    of the call, ``per_iter_ms`` the mean steady-state iteration time.
    """
    chunk = speech_like(chunk_ms / 1000.0, seed=seed)
    rows = []
    for count in iteration_counts:
        attack_cfg = AttackConfig(iterations=count, use_masking=masked)
        generate_noise(chunk, attack_cfg=attack_cfg)  # warm-up
        totals, marginals = [], []
        for _ in range(repeats):
            t0 = time.perf_counter()
            noise = generate_noise(chunk, attack_cfg=attack_cfg)
            totals.append((time.perf_counter() - t0) * 1000.0)
            marginals.append(float(sum(noise.iteration_ms)))
        total = statistics.median(totals)
        marginal = statistics.median(marginals)
        rows.append({
            "backend": kernels.BACKEND,
            "chunk_ms": chunk_ms,
            "iterations": count,
            "masked": int(masked),
            "total_ms": total,
            "fixed_ms": max(0.0, total - marginal),
            "per_iter_ms": marginal / count,
            "marginal_ms": marginal,
        })
    return rows


def cmd_bench(args) -> int:
    try:
        counts = [int(v) for v in args.iterations.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"--iterations: expected comma-separated integers, got {args.iterations!r}") from None
    if not counts or min(counts) < 1:
        raise ValidationError("--iterations: counts must be >= 1")
    if args.repeats < 1:
        raise ValidationError("--repeats must be >= 1")
    rows = bench_rows(counts, args.chunk_ms, args.repeats, not args.no_mask, getattr(args, "seed", 0))
    print(f"{'iters':>5} {'total ms':>9} {'fixed ms':>9} {'per-iter ms':>11}  ({kernels.BACKEND})")
    for r in rows:
        print(f"{r['iterations']:>5} {r['total_ms']:>9.3f} {r['fixed_ms']:>9.3f} {r['per_iter_ms']:>11.3f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
            writer.writeheader()
            for r in rows:
                writer.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()})
    return EXIT_OK


def cmd_mfcc(args) -> int:
    cfg = _config(args)
    buffer = read_wav(args.input)
    trace = analyze(buffer.samples, buffer.sample_rate, cfg.mfcc)
    if args.out:
        _save_matrix(Path(args.out), trace.coeffs)
    else:
        np.savetxt(sys.stdout, trace.coeffs, delimiter=",", fmt="%.10g")
    if getattr(args, "dump_dir", None):
        _dump(args.dump_dir, "", trace)
    return EXIT_OK


COMMANDS = {
    "perturb": cmd_perturb,
    "eval": cmd_eval,
    "stream": cmd_stream,
    "bench": cmd_bench,
    "mfcc": cmd_mfcc,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MfccShieldError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
