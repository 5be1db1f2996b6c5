"""Stage functions shared by the command line and the test harness."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

from .curves import (
    CurveError,
    approximation_error_series,
    count_series,
    fit_ball_constant,
    fit_three_phase,
    per_pit_series,
    total_area_series,
)
from .model import AnalysisSeries, DriveMeta, EolPolicy, FrameRef, LoadSpec, PitObservation, PitTrack, SpindleSpec
from .segment import SegmentationError, SegmentationParams, build_reference, segment_frame
from .standards import evaluate_eol, first_exceedance_drive, nominal_life_l10
from .store import Dataset, DataError, series_document
from .synth import GroundTruth, render_drive
from .track import TrackingParams, birth_fraction, track_observations


def measure_dataset(
    dataset: Dataset, params: SegmentationParams, jobs: int = 1
) -> list[PitObservation]:
    """Segment every frame of every drive against the drive-0 reference."""
    params.check()
    drive0 = dataset.frames.get(0)
    if not drive0:
        raise DataError(f"{dataset.root}: drive 0 (reference drive) is missing")
    ref = build_reference(
        {f.frame_index: dataset.load_frame(0, f.frame_index) for f in drive0}, params.blur_radius_px
    )

    def one(frame: FrameRef) -> list[PitObservation]:
        try:
            return segment_frame(
                dataset.load_frame(frame.drive_index, frame.frame_index),
                frame, ref, params, dataset.calibration, dataset.spindle,
            )
        except SegmentationError as exc:
            raise DataError(str(exc)) from None

    frames = [f for d in dataset.drives for f in dataset.frames[d.drive_index]]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_frame = list(pool.map(one, frames))
    else:
        per_frame = [one(f) for f in frames]
    return _ordered([o for batch in per_frame for o in batch])


def _ordered(observations: Iterable[PitObservation]) -> list[PitObservation]:
    return sorted(
        observations,
        key=lambda o: (o.drive_index, o.centroid.axial_mm, o.centroid.tangential_mm, o.frame.frame_index),
    )


def measure_scenario(
    truth: GroundTruth, params: SegmentationParams | None = None
) -> list[PitObservation]:
    """Render and segment a synthetic scenario in memory."""
    params = (params or SegmentationParams()).check()
    cfg = truth.config
    frames0, _ = render_drive(truth, 0)
    ref = build_reference(frames0, params.blur_radius_px)
    obs = []
    for d in range(cfg.n_drives):
        frames = frames0 if d == 0 else render_drive(truth, d)[0]
        for f, img in frames.items():
            frame = FrameRef.at(d, f, truth.calibration.angular_step_deg, cfg.width_px, cfg.height_px)
            obs.extend(segment_frame(img, frame, ref, params, truth.calibration, truth.spindle))
    return _ordered(obs)


def scenario_tracking_params(spindle: SpindleSpec, params: TrackingParams | None = None) -> TrackingParams:
    params = params or TrackingParams()
    if params.circumference_mm is None:
        params = TrackingParams(params.match_radius_mm, params.enable_monotone_envelope, spindle.circumference_mm)
    return params


def run_tracking(
    observations: Sequence[PitObservation], spindle: SpindleSpec, params: TrackingParams | None = None
) -> list[PitTrack]:
    return track_observations(observations, scenario_tracking_params(spindle, params))


def _fit_doc(series: AnalysisSeries) -> dict:
    try:
        fit = fit_three_phase(series)
    except CurveError as exc:
        return {"error": str(exc)}
    return {
        "breakpoints": list(fit.breakpoints),
        "segment_slopes": list(fit.segment_slopes),
        "intercept": fit.intercept,
        "sse": fit.sse,
        "line_sse": fit.line_sse,
        "distinct_phases": fit.distinct_phases,
    }


def analyze(
    tracks: Sequence[PitTrack],
    drives: Sequence[DriveMeta],
    end_drive: int,
    spindle: SpindleSpec,
    load: LoadSpec,
) -> dict:
    """All analysis series, phase fits and per-pit constants as one document."""
    tracks = sorted(tracks, key=lambda t: t.track_id)
    counts = count_series(tracks, drives, end_drive)
    areas = total_area_series(tracks, drives, end_drive)
    series = [counts, areas]
    ball, births = {}, {}
    for t in tracks:
        for q in ("area", "axial", "tangential"):
            series.append(per_pit_series(t, q, drives, end_drive))
        series.append(approximation_error_series(t, drives, end_drive))
        if t.birth_drive <= end_drive:
            births[str(t.track_id)] = birth_fraction(t, end_drive, drives)
        if len(t.observations) >= 3:
            bc = fit_ball_constant(t)
            ball[str(t.track_id)] = {"c_mm": bc.c_mm, "saturated": bc.saturated}
    l10 = nominal_life_l10(spindle.dynamic_load_rating_kN, load.mean_axial_load_kN)
    observed = next(d.cumulative_revolutions for d in drives if d.drive_index == end_drive)
    return {
        "end_drive": end_drive,
        "track_count": len(tracks),
        "surviving_track_count": sum(1 for t in tracks if not t.merged),
        "series": {s.name: series_document(s) for s in series},
        "phase_fits": {"pit_count": _fit_doc(counts), "total_area": _fit_doc(areas)},
        "ball_constants": ball,
        "birth_fractions": births,
        "lifetime": {
            "l10_revolutions": l10,
            "observed_revolutions": observed,
            "observed_over_l10": observed / l10,
        },
    }


def eol_report(
    tracks: Sequence[PitTrack],
    drives: Sequence[DriveMeta],
    at_drive: int,
    spindle: SpindleSpec,
    load: LoadSpec,
    alpha: float,
) -> dict:
    policy = EolPolicy(alpha, spindle.ball_diameter_mm)
    verdict = evaluate_eol(tracks, at_drive, policy)
    l10 = nominal_life_l10(spindle.dynamic_load_rating_kN, load.mean_axial_load_kN)
    observed = next(d.cumulative_revolutions for d in drives if d.drive_index == at_drive)
    return {
        "threshold_mm": verdict.threshold_mm,
        "alpha": alpha,
        "d_s_mm": verdict.max_major_axis_mm,
        "exceeded": verdict.exceeded,
        "decisive_track": verdict.decisive_track,
        "first_exceedance_drive": first_exceedance_drive(tracks, drives, policy),
        "l10_revolutions": l10,
        "observed_over_l10": observed / l10,
        "at_drive": at_drive,
        "margin": verdict.margin,
        "sum_major_axes_mm": verdict.sum_major_axes_mm,
    }


def summary_text(dataset: Dataset, analysis: dict, report: dict) -> str:
    fits = analysis["phase_fits"]
    lines = [
        f"spindle {dataset.spindle.id}: {len(dataset.drives)} drives, end drive {analysis['end_drive']}"
        + (" (failed)" if dataset.failed else ""),
        f"pits tracked: {analysis['track_count']} ({analysis['surviving_track_count']} surviving)",
        f"observed life: {analysis['lifetime']['observed_over_l10']:.3f} x L10 "
        f"({analysis['lifetime']['l10_revolutions']:.0f} rev)",
    ]
    for name, fit in fits.items():
        if "error" in fit:
            lines.append(f"{name} three-phase fit: {fit['error']}")
        else:
            t1, t2 = fit["breakpoints"]
            s = ", ".join(f"{x:.4g}" for x in fit["segment_slopes"])
            flag = "" if fit["distinct_phases"] else " [no distinct phases]"
            lines.append(f"{name} three-phase fit: breaks {t1:.3f}/{t2:.3f}, slopes {s}{flag}")
    lines.append(verdict_line(report))
    lines.append(
        "note: pit counts are by physical origin; coalesced pits keep their own birth record"
    )
    return "\n".join(lines) + "\n"


def verdict_line(report: dict) -> str:
    state = "EXCEEDED" if report["exceeded"] else "ok"
    first = report["first_exceedance_drive"]
    return (
        f"EOL {state}: d_s = {report['d_s_mm']:.4f} mm vs threshold {report['threshold_mm']:.4f} mm "
        f"(alpha {report['alpha']:g}, track {report['decisive_track']}, "
        f"first exceedance drive {first if first is not None else '-'})"
    )
