"""Pit growth mathematics and lifetime analysis series.

Areas use the elliptic pit model ``A = pi/4 * a * b`` (axial length ``a``,
tangential length ``b``), its circular special case for young pits, and the
late-stage form ``A = pi/2 * b * c`` where ``c`` is half the saturated axial
length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import AnalysisSeries, DriveMeta, PitTrack
from .track import revolutions_at

APPROX_EPS_MM2 = 1e-9
QUANTITIES = {
    "area": ("area_mm2", "mm^2"),
    "axial": ("axial_length_mm", "mm"),
    "tangential": ("tangential_length_mm", "mm"),
}


class CurveError(ValueError):
    pass


def _nonneg(**values: float) -> None:
    for name, v in values.items():
        if not v >= 0:
            raise CurveError(f"{name} must be >= 0 (got {v!r})")


def ellipse_area(a: float, b: float) -> float:
    _nonneg(a=a, b=b)
    return math.pi / 4 * a * b


def initial_circle_area(b: float) -> float:
    _nonneg(b=b)
    return math.pi / 4 * b * b


def late_stage_area(b: float, c: float) -> float:
    _nonneg(b=b)
    if not c > 0:
        raise CurveError(f"ball-dependent constant must be > 0 (got {c!r})")
    return math.pi / 2 * b * c


@dataclass(frozen=True)
class BallConstant:
    c_mm: float
    saturated: bool


def fit_ball_constant(track: PitTrack, tolerance: float = 0.05) -> BallConstant:
    """Half the largest observed axial length.

    ``saturated`` is False when both of the last two axial increments exceed
    ``tolerance`` times the maximum, i.e. the plateau has not been reached.
    """
    axial = [o.axial_length_mm for o in track.observations]
    if len(axial) < 3:
        raise CurveError(f"track {track.track_id} needs >= 3 observations, has {len(axial)}")
    top = max(axial)
    steps = np.diff(axial[-3:])
    saturated = not bool(np.all(steps > tolerance * top))
    return BallConstant(top / 2, saturated)


def normalize_lifetime(drives: Sequence[DriveMeta], failure_drive: int) -> dict[int, float]:
    total = revolutions_at(drives, failure_drive)
    if not total > 0:
        raise CurveError("failure drive has no cumulative revolutions")
    return {d.drive_index: d.cumulative_revolutions / total for d in drives}


def _timeline(drives: Sequence[DriveMeta], failure_drive: int) -> list[tuple[int, float]]:
    """Drives up to failure with strictly increasing normalized time (last wins on ties)."""
    frac = normalize_lifetime(drives, failure_drive)
    out: list[tuple[int, float]] = []
    for d in sorted(drives, key=lambda d: d.drive_index):
        if d.drive_index > failure_drive:
            break
        t = frac[d.drive_index]
        if out and t <= out[-1][1]:
            out[-1] = (d.drive_index, t)
        else:
            out.append((d.drive_index, t))
    return out


def count_series(
    tracks: Sequence[PitTrack], drives: Sequence[DriveMeta], failure_drive: int
) -> AnalysisSeries:
    """Number of pits born at or before each drive, merged tracks included."""
    births = np.sort([t.birth_drive for t in tracks])
    line = _timeline(drives, failure_drive)
    counts = np.searchsorted(births, [d for d, _ in line], side="right")
    return AnalysisSeries.from_arrays("pit_count", [t for _, t in line], counts, "count")


def total_area_series(
    tracks: Sequence[PitTrack], drives: Sequence[DriveMeta], failure_drive: int
) -> AnalysisSeries:
    """Sum of latest-known areas of tracks that have not merged by each drive."""
    line = _timeline(drives, failure_drive)
    values = []
    for drive, _ in line:
        total = 0.0
        for t in tracks:
            if t.merged_drive is not None and drive >= t.merged_drive:
                continue
            latest = None
            for o in t.observations:
                if o.drive_index > drive:
                    break
                latest = o.area_mm2
            if latest is not None:
                total += latest
        values.append(total)
    return AnalysisSeries.from_arrays("total_area", [t for _, t in line], values, "mm^2")


def per_pit_series(
    track: PitTrack, quantity: str, drives: Sequence[DriveMeta], failure_drive: int
) -> AnalysisSeries:
    if quantity not in QUANTITIES:
        raise CurveError(f"unknown quantity {quantity!r}; expected one of {sorted(QUANTITIES)}")
    if not track.observations:
        raise CurveError(f"track {track.track_id} is empty")
    attr, unit = QUANTITIES[quantity]
    frac = normalize_lifetime(drives, failure_drive)
    try:
        times = [frac[o.drive_index] for o in track.observations]
    except KeyError as exc:
        raise CurveError(f"observation drive {exc.args[0]} missing from drive list") from None
    values = [getattr(o, attr) for o in track.observations]
    return AnalysisSeries.from_arrays(f"pit_{track.track_id}_{quantity}", times, values, unit)


def approximation_error_series(
    track: PitTrack, drives: Sequence[DriveMeta] | None = None, failure_drive: int | None = None
) -> AnalysisSeries:
    """Relative error of the ellipse area against the measured area, per observation.

    Times are normalized lifetimes when ``drives`` and ``failure_drive`` are
    given, otherwise raw drive indices.
    """
    if drives is not None and failure_drive is not None:
        frac = normalize_lifetime(drives, failure_drive)
        times = [frac[o.drive_index] for o in track.observations]
    else:
        times = [float(o.drive_index) for o in track.observations]
    errors = []
    for o in track.observations:
        model = ellipse_area(o.axial_length_mm, o.tangential_length_mm)
        errors.append(abs(o.area_mm2 - model) / max(o.area_mm2, APPROX_EPS_MM2))
    return AnalysisSeries.from_arrays(f"pit_{track.track_id}_approx_error", times, errors, "1")


@dataclass(frozen=True)
class PhaseFit:
    """Continuous three-segment linear fit."""

    breakpoints: tuple[float, float]
    segment_slopes: tuple[float, float, float]
    intercept: float
    sse: float
    line_sse: float
    distinct_phases: bool

    def predict(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        t1, t2 = self.breakpoints
        s1, s2, s3 = self.segment_slopes
        return (
            self.intercept
            + s1 * t
            + (s2 - s1) * np.maximum(t - t1, 0)
            + (s3 - s2) * np.maximum(t - t2, 0)
        )


def _lstsq_sse(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return coef, float(r @ r)


def fit_three_phase(
    series: AnalysisSeries, min_gap: float = 0.05, min_points: int = 2, spread_tol: float = 0.10
) -> PhaseFit:
    """Exhaustive breakpoint search for a continuous three-segment line.

    Breakpoints are taken from the sample times. A candidate pair
    ``(t[i], t[j])`` is admissible when ``t[j] - t[i] >= min_gap`` and every
    segment, endpoints included, holds at least ``min_points`` samples. For
    each pair the model ``c + s1*t + d2*(t-t1)+ + d3*(t-t2)+`` is solved by
    least squares; the pair with the smallest residual wins (first found on
    exact ties).
    """
    t = np.asarray(series.times, dtype=float)
    y = np.asarray(series.values, dtype=float)
    n = len(t)
    if n < 8:
        raise CurveError(f"three-phase fit needs >= 8 points, got {n}")
    if t.min() < 0 or t.max() > 1:
        raise CurveError("normalized times must lie within [0, 1]")

    ones = np.ones(n)
    _, line_sse = _lstsq_sse(np.column_stack((ones, t)), y)
    k = min_points - 1
    best = None
    for i in range(k, n - 1):
        js = np.arange(i + k, n - k)
        js = js[t[js] - t[i] >= min_gap - 1e-12]
        if js.size == 0:
            continue
        # all candidate second breakpoints for this first one, solved as a batch
        X = np.empty((js.size, n, 4))
        X[:, :, 0] = 1.0
        X[:, :, 1] = t
        X[:, :, 2] = np.maximum(t - t[i], 0)
        X[:, :, 3] = np.maximum(t[None, :] - t[js][:, None], 0)
        gram = np.einsum("pnk,pnl->pkl", X, X)
        rhs = np.einsum("pnk,n->pk", X, y)
        coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
        resid = y[None, :] - np.einsum("pnk,pk->pn", X, coef)
        sse = np.einsum("pn,pn->p", resid, resid)
        m = int(np.argmin(sse))
        if best is None or sse[m] < best[0]:
            best = (float(sse[m]), i, int(js[m]))
    if best is None:
        raise CurveError("no admissible breakpoint pair for this series")
    _, i, j = best
    X = np.column_stack((ones, t, np.maximum(t - t[i], 0), np.maximum(t - t[j], 0)))
    coef, sse = _lstsq_sse(X, y)
    s1 = coef[1]
    s2 = s1 + coef[2]
    s3 = s2 + coef[3]
    slopes = (float(s1), float(s2), float(s3))
    scale = max(abs(s) for s in slopes)
    distinct = scale > 0 and (max(slopes) - min(slopes)) / scale >= spread_tol
    return PhaseFit(
        breakpoints=(float(t[i]), float(t[j])),
        segment_slopes=slopes,
        intercept=float(coef[0]),
        sse=min(sse, line_sse),
        line_sse=line_sse,
        distinct_phases=bool(distinct),
    )


@dataclass(frozen=True)
class LifetimeStats:
    ratios: dict[str, float]
    median: float
    q1: float
    q3: float
    minimum: float
    maximum: float


def lifetime_stats(
    observed_failures: Sequence[tuple[str, float]] | Mapping[str, float],
    l10_revolutions: Mapping[str, float],
) -> LifetimeStats:
    """Observed life over nominal L10 per spindle with box-plot statistics.

    Quartiles use linear interpolation between order statistics.
    """
    observed = dict(observed_failures)
    if not observed or not l10_revolutions:
        raise CurveError("lifetime statistics need at least one spindle")
    if set(observed) != set(l10_revolutions):
        raise CurveError(
            f"spindle ids differ: {sorted(set(observed) ^ set(l10_revolutions))}"
        )
    ratios = {k: observed[k] / l10_revolutions[k] for k in sorted(observed)}
    v = np.fromiter(ratios.values(), dtype=float)
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return LifetimeStats(ratios, float(med), float(q1), float(q3), float(v.min()), float(v.max()))


__all__ = [
    "BallConstant",
    "CurveError",
    "LifetimeStats",
    "PhaseFit",
    "approximation_error_series",
    "count_series",
    "ellipse_area",
    "fit_ball_constant",
    "fit_three_phase",
    "initial_circle_area",
    "late_stage_area",
    "lifetime_stats",
    "normalize_lifetime",
    "per_pit_series",
    "total_area_series",
]
