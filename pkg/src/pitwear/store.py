"""On-disk dataset layout and output persistence.

Layout::

    root/spindle.json
    root/drives/drive_000000/meta.json
    root/drives/drive_000000/frame_000.png
    root/out/observations.csv, tracks.json, analysis.json, eol_report.json

Floats are written with Python's shortest round-trip repr and records in a
fixed order, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import cv2
import numpy as np
from PIL import Image

from .calib import Calibration
from .model import (
    AnalysisSeries,
    DriveMeta,
    FrameRef,
    LoadSpec,
    PitObservation,
    PitTrack,
    SpindleSpec,
    SurfaceCoord,
    drive_sequence_violations,
)
from .segment import to_gray

SPINDLE_FILE = "spindle.json"
DRIVES_DIR = "drives"
OUT_DIR = "out"
OBSERVATION_COLUMNS = (
    "drive_index",
    "frame_index",
    "centroid_axial_mm",
    "centroid_tangential_mm",
    "axial_mm",
    "tangential_mm",
    "area_mm2",
    "pixel_count",
)


class DataError(ValueError):
    """Missing, malformed or inconsistent dataset files."""


def drive_dir(root: Path, drive_index: int) -> Path:
    return Path(root) / DRIVES_DIR / f"drive_{drive_index:06d}"


def frame_path(root: Path, drive_index: int, frame_index: int) -> Path:
    return drive_dir(root, drive_index) / f"frame_{frame_index:03d}.png"


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _read_json(path: Path) -> Any:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


@dataclass
class Dataset:
    root: Path
    spindle: SpindleSpec
    load: LoadSpec
    calibration: Calibration
    drives: list[DriveMeta]
    failed: bool
    failure_drive: int | None
    frames: dict[int, list[FrameRef]] = field(default_factory=dict, repr=False)

    @property
    def out_dir(self) -> Path:
        return self.root / OUT_DIR

    @property
    def end_drive(self) -> int:
        """Drive taken as 100 % life: the flagged failure drive, else the last drive."""
        if self.failure_drive is not None:
            return self.failure_drive
        return self.drives[-1].drive_index

    def frame_refs(self, drive_index: int) -> list[FrameRef]:
        return self.frames[drive_index]

    def load_frame(self, drive_index: int, frame_index: int) -> np.ndarray:
        path = frame_path(self.root, drive_index, frame_index)
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise DataError(f"cannot read image: {path}")
        return to_gray(img)


def spindle_document(
    spindle: SpindleSpec,
    load: LoadSpec,
    calibration: Calibration,
    failed: bool = False,
    failure_drive: int | None = None,
) -> dict:
    return {
        "spindle": asdict(spindle),
        "load": asdict(load),
        "calibration": asdict(calibration),
        "failed": failed,
        "failure_drive": failure_drive,
    }


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise DataError(f"{where}: expected an object")
    names = [f for f in cls.__dataclass_fields__]
    try:
        return cls(**{k: data[k] for k in names if k in data})
    except TypeError as exc:
        missing = [k for k in names if k not in data]
        raise DataError(f"{where}: missing field(s) {missing}" if missing else f"{where}: {exc}") from None


def read_spindle_document(path: Path) -> tuple[SpindleSpec, LoadSpec, Calibration, bool, int | None]:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected an object")
    for key in ("spindle", "load", "calibration"):
        if key not in doc:
            raise DataError(f"{path}: missing field '{key}'")
    spindle = _build(SpindleSpec, doc["spindle"], f"{path}:spindle")
    load = _build(LoadSpec, doc["load"], f"{path}:load")
    cal = _build(Calibration, doc["calibration"], f"{path}:calibration")
    for where, obj in (("spindle", spindle), ("load", load), ("calibration", cal)):
        problems = obj.violations()
        if problems:
            raise DataError(f"{path}:{where}: " + "; ".join(problems))
    failed = bool(doc.get("failed", False))
    failure_drive = doc.get("failure_drive")
    return spindle, load, cal, failed, None if failure_drive is None else int(failure_drive)


def write_spindle(root: Path, *args, **kwargs) -> Path:
    return _write_text(Path(root) / SPINDLE_FILE, dumps(spindle_document(*args, **kwargs)))


def write_drive(
    root: Path, meta: DriveMeta, frames: Mapping[int, np.ndarray], angular_step_deg: float
) -> Path:
    """Write one drive's meta.json and PNG frames."""
    ddir = drive_dir(root, meta.drive_index)
    ddir.mkdir(parents=True, exist_ok=True)
    refs = []
    for f in sorted(frames):
        img = frames[f]
        if not cv2.imwrite(str(frame_path(root, meta.drive_index, f)), img):
            raise DataError(f"cannot write frame {f} of drive {meta.drive_index}")
        ref = FrameRef.at(meta.drive_index, f, angular_step_deg, img.shape[1], img.shape[0])
        refs.append(
            {
                "frame_index": ref.frame_index,
                "rotation_step_deg": ref.rotation_step_deg,
                "width_px": ref.width_px,
                "height_px": ref.height_px,
            }
        )
    doc = meta.to_dict()
    doc["frames"] = refs
    return _write_text(ddir / "meta.json", dumps(doc))


def load_dataset(root: str | os.PathLike, check_images: bool = True) -> Dataset:
    """Parse and validate a dataset directory; images are read on demand."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    spindle, load, cal, failed, failure_drive = read_spindle_document(root / SPINDLE_FILE)
    ddir = root / DRIVES_DIR
    if not ddir.is_dir():
        raise DataError(f"missing directory: {ddir}")
    drives: list[DriveMeta] = []
    frames: dict[int, list[FrameRef]] = {}
    for sub in sorted(p for p in ddir.iterdir() if p.is_dir()):
        meta_path = sub / "meta.json"
        doc = _read_json(meta_path)
        try:
            meta = DriveMeta.from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{meta_path}: bad or missing field {exc}") from None
        if sub.name != f"drive_{meta.drive_index:06d}":
            raise DataError(f"{meta_path}: drive_index {meta.drive_index} does not match directory")
        refs = []
        for fd in doc.get("frames", []):
            try:
                ref = FrameRef(
                    meta.drive_index,
                    int(fd["frame_index"]),
                    float(fd["rotation_step_deg"]),
                    int(fd["width_px"]),
                    int(fd["height_px"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{meta_path}: bad frame entry ({exc})") from None
            problems = ref.violations(cal.angular_step_deg)
            if problems:
                raise DataError(f"{meta_path}: frame {ref.frame_index}: " + "; ".join(problems))
            if check_images:
                path = frame_path(root, meta.drive_index, ref.frame_index)
                if not path.is_file():
                    raise DataError(f"missing frame image: {path}")
                with Image.open(path) as im:
                    if im.size != (ref.width_px, ref.height_px):
                        raise DataError(
                            f"{path}: image is {im.size[0]}x{im.size[1]}, "
                            f"meta.json declares {ref.width_px}x{ref.height_px}"
                        )
            refs.append(ref)
        if len(refs) != meta.frame_count:
            raise DataError(f"{meta_path}: frame_count {meta.frame_count} but {len(refs)} frames listed")
        drives.append(meta)
        frames[meta.drive_index] = refs
    if not drives:
        raise DataError(f"no drives under {ddir}")
    problems = drive_sequence_violations(drives)
    if problems:
        raise DataError(f"{ddir}: " + "; ".join(problems))
    if failure_drive is not None and failure_drive not in frames:
        raise DataError(f"{root / SPINDLE_FILE}: failure_drive {failure_drive} is not a recorded drive")
    return Dataset(root, spindle, load, cal, drives, failed, failure_drive, frames)


# --- observations ---------------------------------------------------------

def _obs_row(o: PitObservation) -> list:
    return [
        o.drive_index,
        o.frame.frame_index,
        o.centroid.axial_mm,
        o.centroid.tangential_mm,
        o.axial_length_mm,
        o.tangential_length_mm,
        o.area_mm2,
        o.pixel_count,
    ]


def observations_csv(observations: Iterable[PitObservation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OBSERVATION_COLUMNS)
    for o in observations:
        w.writerow([repr(v) if isinstance(v, float) else v for v in _obs_row(o)])
    return buf.getvalue()


def write_observations(path: Path, observations: Iterable[PitObservation]) -> Path:
    return _write_text(Path(path), observations_csv(observations))


def _obs_from_record(rec: Mapping[str, Any], frame_lookup) -> PitObservation:
    drive, frame_index = int(rec["drive_index"]), int(rec["frame_index"])
    return PitObservation(
        drive_index=drive,
        frame=frame_lookup(drive, frame_index),
        centroid=SurfaceCoord(float(rec["centroid_axial_mm"]), float(rec["centroid_tangential_mm"])),
        axial_length_mm=float(rec["axial_mm"]),
        tangential_length_mm=float(rec["tangential_mm"]),
        area_mm2=float(rec["area_mm2"]),
        pixel_count=int(rec["pixel_count"]),
    )


def _frame_lookup(dataset: Dataset | None):
    def lookup(drive: int, frame_index: int) -> FrameRef:
        if dataset is not None:
            for ref in dataset.frames.get(drive, ()):
                if ref.frame_index == frame_index:
                    return ref
            raise DataError(f"observation references unknown frame {frame_index} of drive {drive}")
        return FrameRef.at(drive, frame_index)

    return lookup


def read_observations(path: Path, dataset: Dataset | None = None) -> list[PitObservation]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path} (run 'measure' first)")
    lookup = _frame_lookup(dataset)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != OBSERVATION_COLUMNS:
            raise DataError(f"{path}: unexpected columns {reader.fieldnames}")
        try:
            return [_obs_from_record(r, lookup) for r in reader]
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from None


# --- tracks ---------------------------------------------------------------

def _obs_record(o: PitObservation) -> dict:
    return dict(zip(OBSERVATION_COLUMNS, _obs_row(o)))


def tracks_document(tracks: Sequence[PitTrack]) -> list[dict]:
    return [
        {
            "track_id": t.track_id,
            "birth_drive": t.birth_drive,
            "merged_into": t.merged_into,
            "merged_drive": t.merged_drive,
            "observations": [_obs_record(o) for o in t.observations],
        }
        for t in sorted(tracks, key=lambda t: t.track_id)
    ]


def write_tracks(path: Path, tracks: Sequence[PitTrack]) -> Path:
    return _write_text(Path(path), dumps(tracks_document(tracks)))


def read_tracks(path: Path, dataset: Dataset | None = None) -> list[PitTrack]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path} (run 'track' first)")
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise DataError(f"{path}: expected an array of tracks")
    lookup = _frame_lookup(dataset)
    try:
        return [
            PitTrack(
                track_id=int(t["track_id"]),
                observations=tuple(_obs_from_record(o, lookup) for o in t["observations"]),
                birth_drive=int(t["birth_drive"]),
                merged_into=t.get("merged_into"),
                merged_drive=t.get("merged_drive"),
            )
            for t in doc
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad track record ({exc})") from None


# --- analyses and reports -------------------------------------------------

def series_document(series: AnalysisSeries) -> dict:
    unit = series.points[0].unit if series.points else ""
    return {
        "unit": unit,
        "normalized_life": series.times,
        "value": series.values,
    }


def series_from_document(name: str, doc: Mapping[str, Any]) -> AnalysisSeries:
    unit = doc.get("unit", "")
    return AnalysisSeries.from_arrays(name, doc["normalized_life"], doc["value"], unit)


def series_csv(series: AnalysisSeries) -> str:
    lines = ["normalized_life,value"]
    lines += [f"{p.normalized_lifetime!r},{p.value!r}" for p in series.points]
    return "\n".join(lines) + "\n"


def write_series_csvs(directory: Path, series: Iterable[AnalysisSeries]) -> list[Path]:
    return [_write_text(Path(directory) / f"{s.name}.csv", series_csv(s)) for s in series]


def write_outputs(
    dataset: Dataset,
    observations: Sequence[PitObservation] | None = None,
    tracks: Sequence[PitTrack] | None = None,
    analyses: Mapping[str, Any] | None = None,
    verdicts: Mapping[str, Any] | None = None,
) -> list[Path]:
    """Write whichever outputs are given under ``<root>/out/``."""
    out = dataset.out_dir
    try:
        paths = []
        if observations is not None:
            paths.append(write_observations(out / "observations.csv", observations))
        if tracks is not None:
            paths.append(write_tracks(out / "tracks.json", tracks))
        if analyses is not None:
            paths.append(_write_text(out / "analysis.json", dumps(analyses)))
        if verdicts is not None:
            paths.append(_write_text(out / "eol_report.json", dumps(verdicts)))
    except OSError as exc:
        raise DataError(f"cannot write outputs under {out}: {exc}") from None
    return paths


def write_json(path: Path, obj: Any) -> Path:
    return _write_text(Path(path), dumps(obj))
