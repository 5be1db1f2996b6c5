"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 (``eol`` only) end of
life criterion exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .pipeline import analyze, eol_report, measure_dataset, run_tracking, summary_text, verdict_line
from .segment import SegmentationParams
from .store import (
    DataError,
    load_dataset,
    read_observations,
    read_tracks,
    series_from_document,
    write_drive,
    write_json,
    write_outputs,
    write_series_csvs,
    write_spindle,
)
from .synth import ScenarioConfig, generate_scenario, render_drive
from .track import TrackingParams

log = logging.getLogger("pitwear")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXCEEDED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    dataset: Path | None = None
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    tracking: TrackingParams = field(default_factory=TrackingParams)
    alpha: float | None = None
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: Path | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read params file {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise DataError(f"{path}: expected an object")
        known = {"dataset", "segmentation", "tracking", "eol", "outputs"}
        unknown = set(doc) - known
        if unknown:
            raise DataError(f"{path}: unknown key(s) {sorted(unknown)}")
        cfg = cls(
            dataset=Path(doc["dataset"]) if doc.get("dataset") else None,
            segmentation=_params(SegmentationParams, doc.get("segmentation", {}), path),
            tracking=_params(TrackingParams, doc.get("tracking", {}), path),
            outputs=dict(doc.get("outputs", {})),
        )
        eol = doc.get("eol", {})
        if "alpha" in eol:
            cfg.alpha = float(eol["alpha"])
        for part in (cfg.segmentation, cfg.tracking):
            if part.violations():
                raise DataError(f"{path}: " + "; ".join(part.violations()))
        return cfg


def _params(cls, data: dict, path: Path):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise DataError(f"{path}: unknown {cls.__name__} field(s) {sorted(unknown)}")
    return cls(**data)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pitwear", description="Visual pitting wear quantification for ball screw spindles.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="write a synthetic wear dataset")
    d = ScenarioConfig()
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--drives", type=int, required=True, help="number of camera drives")
    s.add_argument("--out", type=Path, required=True, help="dataset root to create")
    s.add_argument("--failure-drive", type=int, default=None, help="drive taken as 100%% life (default: last)")
    s.add_argument("--frames-per-drive", type=int, default=d.frames_per_drive)
    s.add_argument("--width", type=int, default=d.width_px)
    s.add_argument("--height", type=int, default=d.height_px)
    s.add_argument("--birth-rates", type=float, nargs=3, default=d.birth_rates, metavar=("L1", "L2", "L3"))
    s.add_argument("--axial-saturation", type=float, default=d.axial_saturation_mm, help="mm")
    s.add_argument("--axial-rate", type=float, default=d.axial_rate)
    s.add_argument("--tangential-base", type=float, default=d.tangential_base_mm, help="birth size, mm")
    s.add_argument("--tangential-rate", type=float, default=d.tangential_rate)
    s.add_argument("--tangential-accel", type=float, default=d.tangential_accel)
    s.add_argument("--noise-sigma", type=float, default=d.noise_sigma)
    s.add_argument("--texture-seed", type=int, default=None)
    s.add_argument("--min-separation", type=float, default=d.min_separation_mm, help="mm")
    s.add_argument("--roughness", type=float, default=d.boundary_roughness)

    m = sub.add_parser("measure", help="segment all frames into observations.csv")
    m.add_argument("--dataset", type=Path, required=True)
    m.add_argument("--params", type=Path, default=None, help="JSON run configuration")
    m.add_argument("--jobs", type=int, default=1, help="frames processed concurrently")

    t = sub.add_parser("track", help="associate observations into tracks.json")
    t.add_argument("--dataset", type=Path, required=True)
    t.add_argument("--params", type=Path, default=None)

    a = sub.add_parser("analyze", help="emit analysis.json and series CSVs")
    a.add_argument("--dataset", type=Path, required=True)

    e = sub.add_parser("eol", help="evaluate the end-of-life criterion")
    e.add_argument("--dataset", type=Path, required=True)
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--at-drive", type=int, default=None, help="default: last drive")

    r = sub.add_parser("report", help="bundle analysis and verdict with a text summary")
    r.add_argument("--dataset", type=Path, required=True)
    r.add_argument("--alpha", type=float, default=None, help="default: params file, else 1.0")
    r.add_argument("--params", type=Path, default=None)
    return p


def _simulate(args) -> int:
    cfg = ScenarioConfig(
        seed=args.seed,
        n_drives=args.drives,
        failure_drive=args.failure_drive,
        birth_rates=tuple(args.birth_rates),
        axial_saturation_mm=args.axial_saturation,
        axial_rate=args.axial_rate,
        tangential_base_mm=args.tangential_base,
        tangential_rate=args.tangential_rate,
        tangential_accel=args.tangential_accel,
        noise_sigma=args.noise_sigma,
        texture_seed=args.texture_seed,
        frames_per_drive=args.frames_per_drive,
        width_px=args.width,
        height_px=args.height,
        min_separation_mm=args.min_separation,
        boundary_roughness=args.roughness,
    )
    truth = generate_scenario(cfg)
    root: Path = args.out
    root.mkdir(parents=True, exist_ok=True)
    write_spindle(root, truth.spindle, cfg.load(truth.spindle), truth.calibration, True, cfg.failure)
    for drive in range(cfg.n_drives):
        frames, meta = render_drive(truth, drive)
        write_drive(root, meta, frames, truth.calibration.angular_step_deg)
        log.info("drive %d written", drive)
    write_json(root / "ground_truth.json", truth.to_dict())
    print(f"wrote {cfg.n_drives} drives with {len(truth.pits)} pits to {root}")
    return EXIT_OK


def _measure(args) -> int:
    run = RunConfig.from_file(args.params)
    ds = load_dataset(args.dataset)
    obs = measure_dataset(ds, run.segmentation, jobs=max(1, args.jobs))
    write_outputs(ds, observations=obs)
    print(f"{len(obs)} observations -> {ds.out_dir / 'observations.csv'}")
    return EXIT_OK


def _track(args) -> int:
    run = RunConfig.from_file(args.params)
    ds = load_dataset(args.dataset, check_images=False)
    obs = read_observations(ds.out_dir / "observations.csv", ds)
    tracks = run_tracking(obs, ds.spindle, run.tracking)
    write_outputs(ds, tracks=tracks)
    merged = sum(1 for t in tracks if t.merged)
    print(f"{len(tracks)} tracks ({merged} merged) -> {ds.out_dir / 'tracks.json'}")
    return EXIT_OK


def _analysis(ds):
    tracks = read_tracks(ds.out_dir / "tracks.json", ds)
    return tracks, analyze(tracks, ds.drives, ds.end_drive, ds.spindle, ds.load)


def _analyze(args) -> int:
    ds = load_dataset(args.dataset, check_images=False)
    _, doc = _analysis(ds)
    write_outputs(ds, analyses=doc)
    write_series_csvs(ds.out_dir / "series", (series_from_document(k, v) for k, v in doc["series"].items()))
    print(f"{len(doc['series'])} series -> {ds.out_dir / 'analysis.json'}")
    return EXIT_OK


def _eol_doc(ds, tracks, alpha: float, at_drive: int | None) -> dict:
    if not alpha > 0:
        raise DataError(f"alpha must be a positive real (got {alpha!r})")
    at = ds.drives[-1].drive_index if at_drive is None else at_drive
    if at not in ds.frames:
        raise DataError(f"drive {at} is not part of the dataset")
    return eol_report(tracks, ds.drives, at, ds.spindle, ds.load, alpha)


def _eol(args) -> int:
    ds = load_dataset(args.dataset, check_images=False)
    tracks = read_tracks(ds.out_dir / "tracks.json", ds)
    doc = _eol_doc(ds, tracks, args.alpha, args.at_drive)
    write_outputs(ds, verdicts=doc)
    print(verdict_line(doc))
    return EXIT_EXCEEDED if doc["exceeded"] else EXIT_OK


def _report(args) -> int:
    run = RunConfig.from_file(args.params)
    alpha = args.alpha if args.alpha is not None else (run.alpha or 1.0)
    ds = load_dataset(args.dataset, check_images=False)
    tracks, analysis = _analysis(ds)
    verdict = _eol_doc(ds, tracks, alpha, None)
    text = summary_text(ds, analysis, verdict)
    write_outputs(ds, analyses=analysis, verdicts=verdict)
    write_json(ds.out_dir / "report.json", {"analysis": analysis, "eol": verdict, "summary": text})
    (ds.out_dir / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "simulate": _simulate,
    "measure": _measure,
    "track": _track,
    "analyze": _analyze,
    "eol": _eol,
    "report": _report,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"pitwear {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_command())
