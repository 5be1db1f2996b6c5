"""Shared domain types for pitting wear quantification.

All types are frozen dataclasses. Invariants are exposed as pure predicates
(``violations()`` returning a tuple of messages) so callers decide whether a
violation is data or an error.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Iterable, Sequence

DEFAULT_ANGULAR_STEP_DEG = 22.5
DEFAULT_FRAME_WIDTH_PX = 2592
DEFAULT_FRAME_HEIGHT_PX = 1944


class InvariantError(ValueError):
    """Raised when a value violates one of its type invariants."""


def _check(obj: Any) -> None:
    problems = obj.violations()
    if problems:
        raise InvariantError(f"{type(obj).__name__}: " + "; ".join(problems))


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class SpindleSpec:
    """Physical identity of a ball screw spindle."""

    id: str
    diameter_mm: float
    lead_mm: float
    ball_diameter_mm: float
    dynamic_load_rating_kN: float
    pretension_class: str = ""

    @property
    def circumference_mm(self) -> float:
        return math.pi * self.diameter_mm

    def violations(self) -> tuple[str, ...]:
        out = []
        bad = set()
        for name in ("diameter_mm", "lead_mm", "ball_diameter_mm", "dynamic_load_rating_kN"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                out.append(f"{name} must be > 0 (got {value!r})")
                bad.add(name)
        # ordering is only meaningful once both lengths are positive
        if not bad & {"diameter_mm", "ball_diameter_mm"} and not (
            self.ball_diameter_mm < self.diameter_mm
        ):
            out.append(
                f"ball_diameter_mm ({self.ball_diameter_mm}) must be smaller than "
                f"diameter_mm ({self.diameter_mm})"
            )
        return tuple(out)

    def check(self) -> "SpindleSpec":
        _check(self)
        return self


def default_spindle() -> SpindleSpec:
    """32x20 spindle with 3.969 mm balls and C_a = 23.6 kN, pre-tension class C3."""
    return SpindleSpec(
        id="BASA-32x20Rx3.969",
        diameter_mm=32.0,
        lead_mm=20.0,
        ball_diameter_mm=3.969,
        dynamic_load_rating_kN=23.6,
        pretension_class="C3",
    )


def validate_spec(spec: SpindleSpec) -> ValidationResult:
    problems = spec.violations()
    return ValidationResult(ok=not problems, violations=problems)


@dataclass(frozen=True)
class LoadSpec:
    mean_axial_load_kN: float
    speed_rpm: float

    def violations(self) -> tuple[str, ...]:
        out = []
        if not self.mean_axial_load_kN > 0:
            out.append(f"mean_axial_load_kN must be > 0 (got {self.mean_axial_load_kN!r})")
        if not self.speed_rpm > 0:
            out.append(f"speed_rpm must be > 0 (got {self.speed_rpm!r})")
        return tuple(out)

    def check(self) -> "LoadSpec":
        _check(self)
        return self


@dataclass(frozen=True)
class DriveMeta:
    """Metadata for one camera drive."""

    drive_index: int
    wall_time: datetime
    cumulative_revolutions: float
    flange_temperature_C: float | None = None
    frame_count: int = 16

    def violations(self) -> tuple[str, ...]:
        out = []
        if self.drive_index < 0:
            out.append("drive_index must be >= 0")
        if self.cumulative_revolutions < 0:
            out.append("cumulative_revolutions must be >= 0")
        if self.frame_count < 0:
            out.append("frame_count must be >= 0")
        return tuple(out)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wall_time"] = self.wall_time.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DriveMeta":
        return cls(
            drive_index=int(d["drive_index"]),
            wall_time=datetime.fromisoformat(d["wall_time"]),
            cumulative_revolutions=float(d["cumulative_revolutions"]),
            flange_temperature_C=(
                None if d.get("flange_temperature_C") is None else float(d["flange_temperature_C"])
            ),
            frame_count=int(d["frame_count"]),
        )


def drive_sequence_violations(drives: Sequence[DriveMeta]) -> tuple[str, ...]:
    """Cross-drive invariants: strictly increasing index, non-decreasing revolutions."""
    out = []
    for d in drives:
        out.extend(f"drive {d.drive_index}: {v}" for v in d.violations())
    for prev, cur in zip(drives, drives[1:]):
        if cur.drive_index <= prev.drive_index:
            out.append(f"drive_index not strictly increasing at {cur.drive_index}")
        if cur.cumulative_revolutions < prev.cumulative_revolutions:
            out.append(f"cumulative_revolutions decreases at drive {cur.drive_index}")
    return tuple(out)


@dataclass(frozen=True)
class FrameRef:
    drive_index: int
    frame_index: int
    rotation_step_deg: float
    width_px: int = DEFAULT_FRAME_WIDTH_PX
    height_px: int = DEFAULT_FRAME_HEIGHT_PX

    @classmethod
    def at(
        cls,
        drive_index: int,
        frame_index: int,
        angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG,
        width_px: int = DEFAULT_FRAME_WIDTH_PX,
        height_px: int = DEFAULT_FRAME_HEIGHT_PX,
    ) -> "FrameRef":
        return cls(
            drive_index=drive_index,
            frame_index=frame_index,
            rotation_step_deg=(frame_index * angular_step_deg) % 360.0,
            width_px=width_px,
            height_px=height_px,
        )

    def violations(self, angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG) -> tuple[str, ...]:
        out = []
        expected = (self.frame_index * angular_step_deg) % 360.0
        if not math.isclose(self.rotation_step_deg, expected, abs_tol=1e-9):
            out.append(f"rotation_step_deg {self.rotation_step_deg} != {expected}")
        if self.width_px <= 0 or self.height_px <= 0:
            out.append("frame dimensions must be positive")
        return tuple(out)


@dataclass(frozen=True)
class SurfaceCoord:
    """Position on the unwrapped spindle surface (mm)."""

    axial_mm: float
    tangential_mm: float

    def distance(self, other: "SurfaceCoord", circumference_mm: float | None = None) -> float:
        da = self.axial_mm - other.axial_mm
        dt = self.tangential_mm - other.tangential_mm
        if circumference_mm:
            dt = math.remainder(dt, circumference_mm)
        return math.hypot(da, dt)


@dataclass(frozen=True)
class PitObservation:
    """One pit measured in one frame of one camera drive."""

    drive_index: int
    frame: FrameRef
    centroid: SurfaceCoord
    axial_length_mm: float
    tangential_length_mm: float
    area_mm2: float
    pixel_count: int

    def violations(self) -> tuple[str, ...]:
        out = []
        a, b, area = self.axial_length_mm, self.tangential_length_mm, self.area_mm2
        if a < 0 or b < 0 or area < 0:
            out.append("lengths and area must be non-negative")
        if self.pixel_count > 0 and area > a * b * (1 + 1e-12):
            out.append(f"area {area} exceeds bounding box {a * b}")
        if self.frame.drive_index != self.drive_index:
            out.append("frame.drive_index differs from drive_index")
        return tuple(out)


@dataclass(frozen=True)
class PitTrack:
    """One pit's identity and observation history.

    ``merged_drive`` records the drive at which the track coalesced into
    ``merged_into``; both are ``None`` for surviving tracks.
    """

    track_id: int
    observations: tuple[PitObservation, ...]
    birth_drive: int
    merged_into: int | None = None
    merged_drive: int | None = None

    @property
    def last(self) -> PitObservation:
        return self.observations[-1]

    @property
    def merged(self) -> bool:
        return self.merged_into is not None

    def violations(self) -> tuple[str, ...]:
        out = []
        drives = [o.drive_index for o in self.observations]
        if any(b <= a for a, b in zip(drives, drives[1:])):
            out.append("observation drive indices must be strictly increasing")
        if drives and self.birth_drive != drives[0]:
            out.append("birth_drive must equal the first observation's drive_index")
        return tuple(out)


@dataclass(frozen=True)
class SeriesPoint:
    normalized_lifetime: float
    value: float
    unit: str


@dataclass(frozen=True)
class AnalysisSeries:
    name: str
    points: tuple[SeriesPoint, ...] = field(default_factory=tuple)

    @classmethod
    def from_arrays(
        cls, name: str, times: Iterable[float], values: Iterable[float], unit: str
    ) -> "AnalysisSeries":
        pts = tuple(SeriesPoint(float(t), float(v), unit) for t, v in zip(times, values))
        return cls(name, pts)

    @property
    def times(self) -> list[float]:
        return [p.normalized_lifetime for p in self.points]

    @property
    def values(self) -> list[float]:
        return [p.value for p in self.points]

    def violations(self) -> tuple[str, ...]:
        out = []
        ts = self.times
        if any(b <= a for a, b in zip(ts, ts[1:])):
            out.append("normalized_lifetime must be strictly increasing")
        if not all(math.isfinite(v) for v in self.values):
            out.append("all values must be finite")
        return tuple(out)


@dataclass(frozen=True)
class EolPolicy:
    alpha: float
    ball_diameter_mm: float

    def violations(self) -> tuple[str, ...]:
        out = []
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            out.append(f"alpha must be a positive real (got {self.alpha!r})")
        if not self.ball_diameter_mm > 0:
            out.append(f"ball_diameter_mm must be > 0 (got {self.ball_diameter_mm!r})")
        return tuple(out)

    def check(self) -> "EolPolicy":
        _check(self)
        return self
