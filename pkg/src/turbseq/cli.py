"""Command-line interface.

Subcommands:
  simulate   degrade a clean frame into a turbulence-like sequence
  filter     temporal mean/median filtering (whole-sequence or sliding)
  warp       align every frame to the temporal median and re-filter
  nlam       measure pseudo-MTF curves on barchart frames
  pipeline   simulate -> restore (mean / median / warped median) -> measure

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
CSV reports are byte-reproducible (fixed 9-significant-digit formatting,
independent of --threads); report paths also render PNG figures next to
the CSVs unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
import time
from dataclasses import fields as dataclass_fields

import numpy as np

from . import nlam as nlam_mod
from . import plots
from .imgseq import Frame, Sequence, load_sequence, read_pgm, write_pgm
from .registration import RegParams, correct_sequence
from .simulate import SimConfig, degrade, save_displacement_maps
from .temporal import FilterKind, WindowSpec, sliding_filter, temporal_mean, temporal_median

__all__ = ["main", "run"]


class UsageError(Exception):
    """Bad flags, bad config, missing inputs: exit code 2."""


# ---------------------------------------------------------------------------
# Config files: '#' comments, [section] headers, key = value entries.
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        sections[current][key.strip().lower()] = value.strip()
    return sections


def load_config_file(path: str | None) -> dict[str, dict[str, str]]:
    if path is None:
        return {"": {}}
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return parse_config_text(fh.read())
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from None


def _build_dataclass(cls, mapping: dict[str, str], overrides: dict, what: str):
    spec = {f.name: f.type for f in dataclass_fields(cls)}
    kwargs = {}
    for key, raw in mapping.items():
        if key not in spec:
            raise UsageError(f"unknown {what} option {key!r}")
        try:
            kwargs[key] = int(raw) if spec[key] == "int" else float(raw)
        except ValueError:
            raise UsageError(f"bad value for {what} option {key!r}: {raw!r}") from None
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise UsageError(f"invalid {what}: {exc}") from None


def sim_config_from(config: dict, **overrides) -> SimConfig:
    return _build_dataclass(SimConfig, config.get("simulate", {}), overrides, "simulate")


def reg_params_from(config: dict, **overrides) -> RegParams:
    return _build_dataclass(RegParams, config.get("register", {}), overrides, "register")


# ---------------------------------------------------------------------------
# Path plumbing
# ---------------------------------------------------------------------------


def resolve_frames(pattern: str) -> list[str]:
    matches = sorted(glob.glob(pattern))
    if not matches:
        raise UsageError(f"no input frames match {pattern!r}")
    return matches


def sequence_paths(pattern: str, count: int) -> list[str]:
    """Output paths for a sequence: '{n}' placeholder or _NNN suffixing."""
    if "{n" in pattern:
        return [pattern.format(n=i) for i in range(count)]
    root, ext = os.path.splitext(pattern)
    return [f"{root}_{i:03d}{ext}" for i in range(count)]


def check_overwrite(paths, force: bool) -> None:
    if force:
        return
    for p in paths:
        if os.path.exists(p):
            raise UsageError(f"refusing to overwrite {p} (pass --force)")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    data = ("\n".join(lines) + "\n").encode("utf-8")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def rmse(a: Frame, b: Frame) -> float:
    d = a.pixels - b.pixels
    return float(np.sqrt(np.mean(d * d)))


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_filter(args) -> int:
    t0 = time.perf_counter()
    seq = load_sequence(resolve_frames(args.frames))
    kind = FilterKind.from_name(args.kind)
    if args.window is None:
        out_paths = [args.out]
        check_overwrite(out_paths, args.force)
        result = temporal_mean(seq) if kind is FilterKind.MEAN else temporal_median(seq)
        write_pgm(result, args.out)
        mode = "whole-sequence"
    else:
        if args.window < 1:
            raise UsageError(f"--window must be >= 1, got {args.window}")
        out_paths = sequence_paths(args.out, seq.count)
        check_overwrite(out_paths, args.force)
        filtered = sliding_filter(seq, kind, WindowSpec(args.window))
        for frame, path in zip(filtered, out_paths):
            write_pgm(frame, path)
        mode = f"sliding window P={args.window}"
    dt = time.perf_counter() - t0
    print(f"filter kind={kind.value} mode={mode} frames={seq.count} "
          f"size={seq.width}x{seq.height} elapsed={dt:.2f}s")
    return 0


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    clean = read_pgm(_require_file(args.clean, "clean frame"))
    config = sim_config_from(
        load_config_file(args.config), seed=args.seed, frames=args.count
    )
    out_paths = sequence_paths(args.out, config.frames)
    targets = list(out_paths) + ([args.truth] if args.truth else [])
    check_overwrite(targets, args.force)
    seq, truth = degrade(clean, config)
    for frame, path in zip(seq, out_paths):
        write_pgm(frame, path)
    if args.truth:
        save_displacement_maps(truth.displacements, args.truth)
    dt = time.perf_counter() - t0
    print(f"simulate frames={config.frames} size={clean.width}x{clean.height} "
          f"seed={config.seed} elapsed={dt:.2f}s")
    return 0


def _write_diagnostics(path, diagnostics) -> None:
    rows = [
        [n, r.final_energy, r.iterations, r.min_jacobian, r.converged]
        for n, r in enumerate(diagnostics)
    ]
    write_csv(path, ["frame", "final_energy", "iterations", "min_jacobian", "converged"], rows)


def cmd_warp(args) -> int:
    t0 = time.perf_counter()
    seq = load_sequence(resolve_frames(args.frames))
    params = reg_params_from(load_config_file(args.config))
    diag_path = args.diagnostics or f"{os.path.splitext(args.out)[0]}_diagnostics.csv"
    targets = [args.out, diag_path]
    warped_paths = sequence_paths(args.warped_out, seq.count) if args.warped_out else []
    targets += warped_paths
    if args.dump_maps:
        targets.append(args.dump_maps)
    fig_path = f"{os.path.splitext(diag_path)[0]}.png"
    if not args.no_figures:
        targets.append(fig_path)
    check_overwrite(targets, args.force)

    warped, _, restored, diagnostics = correct_sequence(seq, params, workers=args.threads)
    write_pgm(restored, args.out)
    for frame, path in zip(warped, warped_paths):
        write_pgm(frame, path)
    if args.dump_maps:
        save_displacement_maps([r.map for r in diagnostics], args.dump_maps)
    _write_diagnostics(diag_path, diagnostics)
    if not args.no_figures:
        plots.save_energy_figure(
            fig_path,
            [r.energy_trace for r in diagnostics],
            labels=[f"frame {n}" for n in range(len(diagnostics))],
        )
    worst = min(r.min_jacobian for r in diagnostics)
    dt = time.perf_counter() - t0
    print(f"warp frames={seq.count} size={seq.width}x{seq.height} "
          f"min_jacobian={worst:.4f} elapsed={dt:.2f}s")
    if worst <= 0:
        print("warning: a recovered map is not diffeomorphic (see diagnostics)",
              file=sys.stderr)
    return 0


def _curve_rows(curve) -> list[list]:
    return [
        [k, f, v]
        for k, f, v in zip(curve.zone_indices, curve.frequencies, curve.delta_s)
    ]


def cmd_nlam(args) -> int:
    paths = resolve_frames(args.frames)
    seq = load_sequence(paths)
    part = nlam_mod.load_partition_file(
        _require_file(args.partition, "partition config"), seq.width, seq.height
    )
    targets = [args.out] + ([args.average] if args.average else [])
    fig_path = f"{os.path.splitext(args.out)[0]}.png"
    if not args.no_figures:
        targets.append(fig_path)
    check_overwrite(targets, args.force)

    curves = [
        nlam_mod.nlam_curve(frame, part, provenance=str(n))
        for n, frame in enumerate(seq)
    ]
    rows = []
    for n, curve in enumerate(curves):
        rows.extend([n, *r] for r in _curve_rows(curve))
    write_csv(args.out, ["frame", "zone", "frequency_cpp", "delta_s"], rows)
    avg = nlam_mod.average_nlam(curves)
    if args.average:
        write_csv(args.average, ["zone", "frequency_cpp", "delta_s"], _curve_rows(avg))
    if not args.no_figures:
        plots.save_curve_figure(
            fig_path, curves,
            labels=[f"frame {n}" for n in range(len(curves))],
            average=avg,
        )
    print(f"nlam frames={seq.count} zones={len(part.zones)} lines={part.lines}")
    return 0


def cmd_pipeline(args) -> int:
    t0 = time.perf_counter()
    clean = read_pgm(_require_file(args.clean, "clean frame"))
    config = load_config_file(args.config)
    sim = sim_config_from(config, seed=args.seed)
    params = reg_params_from(config)
    part = nlam_mod.load_partition_file(
        _require_file(args.partition, "partition config"), clean.width, clean.height
    )

    outdir = args.out_dir
    os.makedirs(outdir, exist_ok=True)
    degraded_paths = [os.path.join(outdir, f"degraded_{n:03d}.pgm") for n in range(sim.frames)]
    named = {
        "truth": os.path.join(outdir, "truth.tdsp"),
        "mean": os.path.join(outdir, "mean.pgm"),
        "median": os.path.join(outdir, "median.pgm"),
        "warp_median": os.path.join(outdir, "warp_median.pgm"),
        "diagnostics": os.path.join(outdir, "diagnostics.csv"),
        "report": os.path.join(outdir, "report.csv"),
    }
    nlam_paths = {
        m: os.path.join(outdir, f"nlam_{m}.csv")
        for m in ("clean", "mean", "median", "warp_median")
    }
    fig_path = os.path.join(outdir, "report.png")
    targets = degraded_paths + list(named.values()) + list(nlam_paths.values())
    if not args.no_figures:
        targets.append(fig_path)
    check_overwrite(targets, args.force)

    def stage(name, fn):
        try:
            return fn()
        except UsageError:
            raise
        except Exception as exc:
            raise RuntimeError(f"[{name}] {exc}") from exc

    seq, truth = stage("simulate", lambda: degrade(clean, sim))
    for frame, path in zip(seq, degraded_paths):
        write_pgm(frame, path)
    save_displacement_maps(truth.displacements, named["truth"])

    mean_frame = stage("filter", lambda: temporal_mean(seq))
    median_frame = stage("filter", lambda: temporal_median(seq))
    _, _, restored, diagnostics = stage(
        "warp", lambda: correct_sequence(seq, params, workers=args.threads)
    )
    write_pgm(mean_frame, named["mean"])
    write_pgm(median_frame, named["median"])
    write_pgm(restored, named["warp_median"])
    _write_diagnostics(named["diagnostics"], diagnostics)

    outputs = {
        "clean": clean,
        "mean": mean_frame,
        "median": median_frame,
        "warp_median": restored,
    }
    curves = {
        name: stage("nlam", lambda f=frame, n=name: nlam_mod.nlam_curve(f, part, provenance=n))
        for name, frame in outputs.items()
    }
    for name, curve in curves.items():
        write_csv(nlam_paths[name], ["zone", "frequency_cpp", "delta_s"], _curve_rows(curve))

    report_rows = [
        ["degraded_first", rmse(seq[0], clean)],
        ["temporal_mean", rmse(mean_frame, clean)],
        ["temporal_median", rmse(median_frame, clean)],
        ["warp_median", rmse(restored, clean)],
    ]
    write_csv(named["report"], ["method", "rmse_to_clean"], report_rows)
    if not args.no_figures:
        rmse_bars = {name: value for name, value in report_rows}
        plots.save_report_figure(fig_path, curves, rmse_bars)

    dt = time.perf_counter() - t0
    print(f"pipeline frames={sim.frames} size={clean.width}x{clean.height} "
          f"seed={sim.seed} outdir={outdir} elapsed={dt:.2f}s")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub, frames=True):
    if frames:
        sub.add_argument("--frames", required=True,
                         help="input frame pattern (glob, sorted lexicographically)")
    sub.add_argument("--force", action="store_true",
                     help="overwrite existing outputs")
    sub.add_argument("--threads", type=int, default=1, metavar="N",
                     help="worker threads for per-frame work, 0 = auto "
                          "(never affects outputs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turbseq",
        description="Restore turbulence-degraded image sequences and measure "
                    "pseudo-MTF performance curves.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("filter", help="temporal mean/median filtering")
    p.add_argument("--kind", required=True, choices=["mean", "median"])
    p.add_argument("--out", required=True, help="output frame (or sequence pattern)")
    p.add_argument("--window", type=int, default=None, metavar="P",
                   help="sliding-window length; omit for whole-sequence mode")
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = subs.add_parser("simulate", help="generate a degraded sequence")
    p.add_argument("--clean", required=True, help="clean input frame (PGM)")
    p.add_argument("--out", required=True, help="output sequence pattern")
    p.add_argument("--config", default=None, help="config file with a [simulate] section")
    p.add_argument("--count", type=int, default=None, help="number of frames (overrides config)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    p.add_argument("--truth", default=None, help="write displacement ground truth (TDSP)")
    _add_common(p, frames=False)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("warp", help="median-reference warping correction")
    p.add_argument("--out", required=True, help="restored output frame (PGM)")
    p.add_argument("--warped-out", default=None, help="optional warped sequence pattern")
    p.add_argument("--diagnostics", default=None, help="diagnostics CSV path")
    p.add_argument("--dump-maps", default=None, help="write recovered maps (TDSP)")
    p.add_argument("--config", default=None, help="config file with a [register] section")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figure output")
    _add_common(p)
    p.set_defaults(func=cmd_warp)

    p = subs.add_parser("nlam", help="pseudo-MTF measurement on barchart frames")
    p.add_argument("--partition", required=True, help="zone partition config file")
    p.add_argument("--out", required=True, help="per-frame curves CSV")
    p.add_argument("--average", default=None, help="averaged curve CSV")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figure output")
    _add_common(p)
    p.set_defaults(func=cmd_nlam)

    p = subs.add_parser("pipeline", help="simulate, restore and measure in one run")
    p.add_argument("--clean", required=True, help="clean input frame (PGM)")
    p.add_argument("--config", default=None,
                   help="config file with [simulate] and [register] sections")
    p.add_argument("--partition", required=True, help="zone partition config file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figure output")
    _add_common(p, frames=False)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
