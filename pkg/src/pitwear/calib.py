"""Pixel <-> millimetre conversion and frame-to-surface mapping.

Frames of one camera drive are treated as exact, non-overlapping tiles of a
helical strip: each angular step advances the imaged patch by
``lead * step / 360`` axially and ``pi * D * step / 360`` tangentially.
Curvature foreshortening inside a frame is ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .model import DEFAULT_ANGULAR_STEP_DEG, FrameRef, SpindleSpec, SurfaceCoord


@dataclass(frozen=True)
class Calibration:
    mm_per_px: float
    axial_axis: Literal["rows", "columns"] = "rows"
    angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG

    @property
    def frames_per_revolution(self) -> int:
        return round(360.0 / self.angular_step_deg)

    def violations(self) -> tuple[str, ...]:
        out = []
        if not (math.isfinite(self.mm_per_px) and self.mm_per_px > 0):
            out.append(f"mm_per_px must be > 0 (got {self.mm_per_px!r})")
        if self.axial_axis not in ("rows", "columns"):
            out.append(f"axial_axis must be 'rows' or 'columns' (got {self.axial_axis!r})")
        step = self.angular_step_deg
        if not step > 0 or not math.isclose(360.0 / step, round(360.0 / step), abs_tol=1e-9):
            out.append(f"angular_step_deg must divide 360 evenly (got {step!r})")
        return tuple(out)

    def check(self) -> "Calibration":
        problems = self.violations()
        if problems:
            raise ValueError("Calibration: " + "; ".join(problems))
        return self


def area_scale(cal: Calibration) -> float:
    """Area of one pixel in mm^2."""
    return cal.mm_per_px ** 2


def tiling_calibration(
    spec: SpindleSpec,
    tangential_extent_px: int,
    angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG,
    axial_axis: Literal["rows", "columns"] = "rows",
) -> Calibration:
    """Scale at which consecutive frames tile the circumference without overlap."""
    advance = spec.circumference_mm * angular_step_deg / 360.0
    return Calibration(advance / tangential_extent_px, axial_axis, angular_step_deg)


def frame_advance(cal: Calibration, spec: SpindleSpec) -> tuple[float, float]:
    """Per-frame (axial, tangential) advance of the imaged patch in mm."""
    frac = cal.angular_step_deg / 360.0
    return spec.lead_mm * frac, spec.circumference_mm * frac


def _split(cal: Calibration, row: float, col: float) -> tuple[float, float]:
    return (row, col) if cal.axial_axis == "rows" else (col, row)


def frame_to_surface(
    cal: Calibration, spec: SpindleSpec, frame: FrameRef, pixel: tuple[float, float]
) -> SurfaceCoord:
    row, col = pixel
    if not (0 <= row <= frame.height_px - 1 and 0 <= col <= frame.width_px - 1):
        raise IndexError(
            f"pixel {pixel} outside frame of {frame.height_px}x{frame.width_px} px"
        )
    axial_px, tang_px = _split(cal, row, col)
    d_ax, d_tg = frame_advance(cal, spec)
    axial = axial_px * cal.mm_per_px + frame.frame_index * d_ax
    tangential = tang_px * cal.mm_per_px + frame.frame_index * d_tg
    return SurfaceCoord(axial, math.fmod(tangential, spec.circumference_mm))


def surface_to_frame(
    cal: Calibration, spec: SpindleSpec, frame: FrameRef, coord: SurfaceCoord
) -> tuple[float, float]:
    """Inverse of :func:`frame_to_surface` for one frame.

    Returns fractional (row, col); the result may fall outside the frame.
    The tangential offset is wrapped to the revolution nearest the frame origin.
    """
    d_ax, d_tg = frame_advance(cal, spec)
    axial_px = (coord.axial_mm - frame.frame_index * d_ax) / cal.mm_per_px
    origin = math.fmod(frame.frame_index * d_tg, spec.circumference_mm)
    offset = coord.tangential_mm - origin
    offset -= spec.circumference_mm * math.floor(offset / spec.circumference_mm)
    if offset > spec.circumference_mm / 2:
        offset -= spec.circumference_mm
    tang_px = offset / cal.mm_per_px
    return (axial_px, tang_px) if cal.axial_axis == "rows" else (tang_px, axial_px)
