"""Nominal L10 life and the alpha-scaled pitting end-of-life criterion.

End of life is reached once the largest pit's major axis (its tangential
length ``d_s``) satisfies ``d_s >= D_w * 0.3 * alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import DriveMeta, EolPolicy, PitTrack

PITTING_DIAMETER_FRACTION = 0.3


class StandardsError(ValueError):
    pass


def nominal_life_l10(C_a: float, F_m: float, correction_factor: float | None = None) -> float:
    """Nominal life in revolutions, ``(C_a / F_m)**3 * 1e6``.

    ``correction_factor`` optionally scales ``C_a`` before cubing; it is off
    unless given explicitly.
    """
    if not (C_a > 0 and F_m > 0):
        raise StandardsError(f"C_a and F_m must be > 0 (got {C_a!r}, {F_m!r})")
    if correction_factor is not None:
        if not correction_factor > 0:
            raise StandardsError("correction_factor must be > 0")
        C_a = C_a * correction_factor
    return (C_a / F_m) ** 3 * 1e6


def eol_threshold(policy: EolPolicy) -> float:
    if not (math.isfinite(policy.alpha) and policy.alpha > 0):
        raise StandardsError(f"alpha must be a positive real (got {policy.alpha!r})")
    if not policy.ball_diameter_mm > 0:
        raise StandardsError(f"ball diameter must be > 0 (got {policy.ball_diameter_mm!r})")
    return policy.ball_diameter_mm * PITTING_DIAMETER_FRACTION * policy.alpha


@dataclass(frozen=True)
class EolVerdict:
    exceeded: bool
    decisive_track: int | None
    max_major_axis_mm: float
    threshold_mm: float
    margin: float
    # sum of the largest tangential length of every surviving pit; report only
    sum_major_axes_mm: float = 0.0


def evaluate_eol(tracks: Sequence[PitTrack], at_drive: int, policy: EolPolicy) -> EolVerdict:
    """Verdict over every observation up to and including ``at_drive``.

    ``d_s`` is the largest tangential length seen so far, which equals the
    largest monotone-envelope value whether or not envelopes were applied.
    """
    if at_drive < 0:
        raise StandardsError("at_drive must be >= 0")
    threshold = eol_threshold(policy)
    d_s = 0.0
    decisive = None
    total = 0.0
    for t in sorted(tracks, key=lambda t: t.track_id):
        seen = [o.tangential_length_mm for o in t.observations if o.drive_index <= at_drive]
        if not seen:
            continue
        longest = max(seen)
        if t.merged_drive is None or t.merged_drive > at_drive:
            total += longest
        if longest > d_s:
            d_s, decisive = longest, t.track_id
    return EolVerdict(
        exceeded=d_s >= threshold,
        decisive_track=decisive,
        max_major_axis_mm=d_s,
        threshold_mm=threshold,
        margin=d_s / threshold,
        sum_major_axes_mm=total,
    )


def first_exceedance_drive(
    tracks: Sequence[PitTrack], drives: Sequence[DriveMeta], policy: EolPolicy
) -> int | None:
    """Earliest drive at which the criterion holds, or None."""
    threshold = eol_threshold(policy)
    crossings = [
        o.drive_index
        for t in tracks
        for o in t.observations
        if o.tangential_length_mm >= threshold
    ]
    if not crossings:
        return None
    first = min(crossings)
    # verdicts are only rendered on listed drives
    return next((d for d in sorted(x.drive_index for x in drives) if d >= first), None)
