"""Association of per-drive observations into persistent pit tracks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .model import DriveMeta, PitObservation, PitTrack


class TrackingError(ValueError):
    pass


@dataclass(frozen=True)
class TrackingParams:
    match_radius_mm: float = 1.0
    enable_monotone_envelope: bool = True
    # tangential distances wrap at this value when given
    circumference_mm: float | None = None

    def violations(self) -> tuple[str, ...]:
        if not self.match_radius_mm > 0:
            return (f"match_radius_mm must be > 0 (got {self.match_radius_mm!r})",)
        return ()


def _obs_key(o: PitObservation) -> tuple[float, float]:
    return (o.centroid.axial_mm, o.centroid.tangential_mm)


def _age_key(t: PitTrack) -> tuple[int, int]:
    return (t.birth_drive, t.track_id)


def associate(
    tracks: Sequence[PitTrack],
    new_obs: Sequence[PitObservation],
    params: TrackingParams,
    next_id: int | None = None,
) -> list[PitTrack]:
    """Extend ``tracks`` with the observations of one drive.

    Observations are visited in ascending (axial, tangential) centroid order;
    each takes the nearest live track within ``match_radius_mm`` that has not
    been claimed yet (smaller ``track_id`` on ties). Unmatched observations
    open new tracks. A live track left without a match but lying within the
    radius of a claimed observation has coalesced with that pit: the younger
    of the two tracks is closed with ``merged_into`` pointing at the older,
    and the older one keeps the observation.
    """
    if params.violations():
        raise TrackingError("; ".join(params.violations()))
    if not new_obs:
        return list(tracks)
    drives = {o.drive_index for o in new_obs}
    if len(drives) != 1:
        raise TrackingError(f"observations span several drives: {sorted(drives)}")
    (drive,) = drives
    last = max((t.last.drive_index for t in tracks), default=-1)
    if drive <= last:
        raise TrackingError(f"drive {drive} is not after the last tracked drive {last}")

    circ = params.circumference_mm
    radius = params.match_radius_mm
    by_id = {t.track_id: t for t in tracks}
    live = sorted((t for t in tracks if not t.merged), key=lambda t: t.track_id)
    if next_id is None:
        next_id = max(by_id, default=-1) + 1

    claimed: dict[int, PitObservation] = {}
    opened: list[PitTrack] = []
    for obs in sorted(new_obs, key=_obs_key):
        best = None
        for t in live:
            if t.track_id in claimed:
                continue
            d = obs.centroid.distance(t.last.centroid, circ)
            if d <= radius and (best is None or d < best[0]):
                best = (d, t.track_id)
        if best is None:
            opened.append(PitTrack(next_id, (obs,), birth_drive=drive))
            next_id += 1
        else:
            claimed[best[1]] = obs

    # coalescence: unclaimed live tracks within reach of a claimed observation
    owner = dict(claimed)
    merges: dict[int, int] = {}
    for t in live:
        if t.track_id in claimed:
            continue
        hits = sorted(
            (obs.centroid.distance(t.last.centroid, circ), tid)
            for tid, obs in owner.items()
            if obs.centroid.distance(t.last.centroid, circ) <= radius
        )
        if not hits:
            continue
        holder = hits[0][1]
        obs = owner[holder]
        older, younger = sorted((by_id[holder], t), key=_age_key)
        merges[younger.track_id] = older.track_id
        if older.track_id != holder:
            del owner[holder]
            owner[older.track_id] = obs
        # the surviving owner may itself absorb further tracks

    result = []
    for t in tracks:
        if t.track_id in owner:
            t = replace(t, observations=t.observations + (owner[t.track_id],))
        elif t.track_id in merges:
            t = replace(t, merged_into=merges[t.track_id], merged_drive=drive)
        result.append(t)
    result.extend(opened)
    return sorted(result, key=lambda t: t.track_id)


class Tracker:
    """Sequential driver for :func:`associate`; owns the growing track list."""

    def __init__(self, params: TrackingParams | None = None) -> None:
        self.params = params or TrackingParams()
        self.tracks: list[PitTrack] = []
        self._last_drive = -1
        self._next_id = 0

    def update(self, drive_index: int, observations: Iterable[PitObservation]) -> None:
        obs = list(observations)
        if drive_index <= self._last_drive:
            raise TrackingError(f"drive {drive_index} is not after drive {self._last_drive}")
        if any(o.drive_index != drive_index for o in obs):
            raise TrackingError(f"observation from another drive passed for drive {drive_index}")
        self.tracks = associate(self.tracks, obs, self.params, self._next_id)
        self._next_id = max((t.track_id for t in self.tracks), default=-1) + 1
        self._last_drive = drive_index

    def finish(self) -> list[PitTrack]:
        if self.params.enable_monotone_envelope:
            return [monotone_envelope(t) for t in self.tracks]
        return list(self.tracks)


def track_observations(
    observations: Iterable[PitObservation], params: TrackingParams | None = None
) -> list[PitTrack]:
    """Run the tracker over observations of many drives, in drive order."""
    tracker = Tracker(params)
    ordered = sorted(observations, key=lambda o: o.drive_index)
    for drive, group in itertools.groupby(ordered, key=lambda o: o.drive_index):
        tracker.update(drive, group)
    return tracker.finish()


def monotone_envelope(track: PitTrack) -> PitTrack:
    """Running maximum of a, b and area; centroids are left untouched."""
    if not track.observations:
        raise TrackingError(f"track {track.track_id} has no observations")
    a = b = area = float("-inf")
    out = []
    for o in track.observations:
        a, b, area = max(a, o.axial_length_mm), max(b, o.tangential_length_mm), max(area, o.area_mm2)
        out.append(replace(o, axial_length_mm=a, tangential_length_mm=b, area_mm2=area))
    return replace(track, observations=tuple(out))


def revolutions_at(drives: Sequence[DriveMeta], drive_index: int) -> float:
    for d in drives:
        if d.drive_index == drive_index:
            return d.cumulative_revolutions
    raise TrackingError(f"drive {drive_index} not present in drive list")


def birth_fraction(track: PitTrack, failure_drive: int, drives: Sequence[DriveMeta]) -> float:
    """Normalized lifetime at which the pit first appeared."""
    if track.birth_drive > failure_drive:
        raise TrackingError(f"track {track.track_id} born after failure drive {failure_drive}")
    total = revolutions_at(drives, failure_drive)
    if total <= 0:
        raise TrackingError("failure drive has zero cumulative revolutions")
    return revolutions_at(drives, track.birth_drive) / total
