"""Synthetic wear scenarios used as ground truth for the measurement chain.

A scenario is a set of pits born by a three-phase piecewise Poisson process
over normalized lifetime, each growing along a closed-form trajectory, and
rendered as dark ellipses onto a smooth per-frame background texture.

All growth constants are synthetic defaults; they only reproduce the
qualitative shape of the wear curves (no births before 20 % of life,
increasing birth rate in later phases, saturating axial growth, accelerating
tangential growth, final tangential/axial ratio of about ten).
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from functools import lru_cache

import cv2
import numpy as np

from .calib import Calibration, frame_to_surface, surface_to_frame, tiling_calibration
from .model import DriveMeta, FrameRef, LoadSpec, SpindleSpec, SurfaceCoord, default_spindle

log = logging.getLogger(__name__)

PHASE_EDGES = (0.2, 0.6, 0.8, 1.0)
EPOCH = datetime(2021, 1, 1, tzinfo=timezone.utc)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_drives: int = 120
    failure_drive: int | None = None
    # expected births per drive inside [0.2, 0.6), [0.6, 0.8), [0.8, 1.0)
    birth_rates: tuple[float, float, float] = (0.06, 0.2, 0.7)
    axial_saturation_mm: float = 0.3
    axial_rate: float = 10.0
    axial_linear_mm: float = 0.02
    tangential_base_mm: float = 0.06
    tangential_rate: float = 3.0
    tangential_accel: float = 1.0
    noise_sigma: float = 2.0
    texture_seed: int | None = None
    frames_per_drive: int = 16
    width_px: int = 1296
    height_px: int = 972
    min_separation_mm: float = 3.0
    boundary_roughness: float = 0.0
    hours_per_drive: float = 4.0
    speed_rpm: float = 400.0
    pit_darkness: float = 0.25

    @property
    def failure(self) -> int:
        return self.n_drives - 1 if self.failure_drive is None else self.failure_drive

    @property
    def texture(self) -> int:
        return self.seed if self.texture_seed is None else self.texture_seed

    def violations(self) -> tuple[str, ...]:
        out = []
        if self.n_drives < 2:
            out.append("n_drives must be >= 2")
        if not 0 < self.failure < self.n_drives:
            out.append("failure_drive must lie in [1, n_drives)")
        if len(self.birth_rates) != 3 or any(r < 0 for r in self.birth_rates):
            out.append("birth_rates must be three non-negative rates")
        if not self.axial_saturation_mm > 0:
            out.append("axial_saturation_mm must be > 0")
        if not 0 < self.tangential_base_mm < self.axial_saturation_mm:
            out.append("tangential_base_mm must lie in (0, axial_saturation_mm)")
        if self.axial_rate <= 0 or self.axial_linear_mm < 0:
            out.append("axial growth constants must be positive")
        if self.tangential_rate < 0 or self.tangential_accel < 0:
            out.append("tangential growth constants must be non-negative")
        if self.noise_sigma < 0 or self.boundary_roughness < 0:
            out.append("noise_sigma and boundary_roughness must be >= 0")
        if self.frames_per_drive < 1 or self.width_px < 8 or self.height_px < 8:
            out.append("frame geometry too small")
        return tuple(out)

    def load(self, spec: SpindleSpec) -> LoadSpec:
        return LoadSpec(mean_axial_load_kN=0.4 * spec.dynamic_load_rating_kN, speed_rpm=self.speed_rpm)

    def revolutions_per_drive(self) -> float:
        return self.hours_per_drive * 60.0 * self.speed_rpm


@dataclass(frozen=True)
class PitParams:
    birth_time: float
    birth_size_mm: float
    axial_saturation_mm: float
    axial_rate: float
    axial_linear_mm: float
    tangential_rate: float
    tangential_accel: float


def pit_trajectory(params: PitParams, t: float) -> tuple[float, float]:
    """Axial and tangential length (mm) at normalized time ``t``.

    Both lengths start at ``birth_size_mm``. The axial length saturates
    exponentially towards ``axial_saturation_mm`` with a small linear drift;
    the tangential length grows quadratically.
    """
    tau = t - params.birth_time
    if tau < 0:
        raise ScenarioError(f"t={t} precedes birth at {params.birth_time}")
    b0 = params.birth_size_mm
    if math.isinf(params.axial_rate):
        sat = 1.0 if tau > 0 else 0.0
    else:
        sat = -math.expm1(-params.axial_rate * tau)
    a = b0 + (params.axial_saturation_mm - b0) * sat + params.axial_linear_mm * tau
    b = b0 + params.tangential_rate * tau + params.tangential_accel * tau * tau
    return a, b


@dataclass(frozen=True)
class PitTruth:
    pit_id: int
    birth_drive: int
    frame_index: int
    pixel: tuple[float, float]
    centroid: SurfaceCoord
    params: PitParams
    roughness_phase: tuple[float, ...] = ()


@dataclass(frozen=True)
class GroundTruth:
    config: ScenarioConfig
    spindle: SpindleSpec
    calibration: Calibration
    pits: tuple[PitTruth, ...]
    drive_times: tuple[float, ...] = field(repr=False)

    def live_pits(self, drive_index: int) -> list[PitTruth]:
        return [p for p in self.pits if p.birth_drive <= drive_index]

    def size_at(self, pit: PitTruth, drive_index: int) -> tuple[float, float, float]:
        """Exact (a, b, ellipse area) of a live pit at a drive."""
        a, b = pit_trajectory(pit.params, max(self.drive_times[drive_index], pit.params.birth_time))
        return a, b, math.pi / 4 * a * b

    def drive_meta(self, drive_index: int) -> DriveMeta:
        cfg = self.config
        return DriveMeta(
            drive_index=drive_index,
            wall_time=EPOCH + timedelta(hours=cfg.hours_per_drive * drive_index),
            cumulative_revolutions=drive_index * cfg.revolutions_per_drive(),
            flange_temperature_C=None,
            frame_count=cfg.frames_per_drive,
        )

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["birth_rates"] = list(self.config.birth_rates)
        drives = []
        for d in range(self.config.n_drives):
            live = []
            for p in self.live_pits(d):
                a, b, area = self.size_at(p, d)
                live.append({"pit_id": p.pit_id, "a_mm": a, "b_mm": b, "area_mm2": area})
            drives.append({"drive_index": d, "normalized_time": self.drive_times[d], "pits": live})
        return {
            "config": cfg,
            "pits": [
                {
                    "pit_id": p.pit_id,
                    "birth_drive": p.birth_drive,
                    "frame_index": p.frame_index,
                    "pixel_row": p.pixel[0],
                    "pixel_col": p.pixel[1],
                    "centroid": asdict(p.centroid),
                    "params": asdict(p.params),
                }
                for p in self.pits
            ],
            "drives": drives,
        }


def _sample_births(cfg: ScenarioConfig, rng: np.random.Generator) -> list[float]:
    span = cfg.failure
    times: list[float] = []
    for rate, lo, hi in zip(cfg.birth_rates, PHASE_EDGES, PHASE_EDGES[1:]):
        n = rng.poisson(rate * (hi - lo) * span)
        times.extend(rng.uniform(lo, hi, size=n).tolist())
    return sorted(times)


def _params_for(cfg: ScenarioConfig, t0: float) -> PitParams:
    return PitParams(
        birth_time=t0,
        birth_size_mm=cfg.tangential_base_mm,
        axial_saturation_mm=cfg.axial_saturation_mm,
        axial_rate=cfg.axial_rate,
        axial_linear_mm=cfg.axial_linear_mm,
        tangential_rate=cfg.tangential_rate,
        tangential_accel=cfg.tangential_accel,
    )


def generate_scenario(
    config: ScenarioConfig,
    spec: SpindleSpec | None = None,
    cal: Calibration | None = None,
    max_attempts: int = 5000,
) -> GroundTruth:
    problems = config.violations()
    if problems:
        raise ScenarioError("ScenarioConfig: " + "; ".join(problems))
    spec = spec or default_spindle()
    if cal is None:
        cal = tiling_calibration(spec, config.width_px)
    birth_rng, place_rng, rough_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    )
    F = config.failure
    times = tuple(d / F for d in range(config.n_drives))
    t_end = times[-1]
    if cal.axial_axis == "rows":
        axial_ext, tang_ext = config.height_px, config.width_px
    else:
        axial_ext, tang_ext = config.width_px, config.height_px

    pits: list[PitTruth] = []
    for t0 in _sample_births(config, birth_rng):
        birth_drive = math.ceil(t0 * F - 1e-12)
        if birth_drive >= config.n_drives:
            continue
        params = _params_for(config, t0)
        a_end, b_end = pit_trajectory(params, max(t_end, t0))
        reach = 1 + config.boundary_roughness
        m_ax = reach * a_end / 2 / cal.mm_per_px + 3
        m_tg = reach * b_end / 2 / cal.mm_per_px + 3
        if axial_ext - 1 - 2 * m_ax < 0 or tang_ext - 1 - 2 * m_tg < 0:
            raise ScenarioError("pit outgrows the frame; enlarge frames or slow growth")
        for _ in range(max_attempts):
            frame_index = int(place_rng.integers(config.frames_per_drive))
            ax_px = place_rng.uniform(m_ax, axial_ext - 1 - m_ax)
            tg_px = place_rng.uniform(m_tg, tang_ext - 1 - m_tg)
            pixel = (ax_px, tg_px) if cal.axial_axis == "rows" else (tg_px, ax_px)
            frame = FrameRef.at(0, frame_index, cal.angular_step_deg, config.width_px, config.height_px)
            centroid = frame_to_surface(cal, spec, frame, pixel)
            if all(_separated(config, spec, centroid, b_end, q, t_end) for q in pits):
                break
        else:
            raise ScenarioError(
                f"could not place pit {len(pits)} with {config.min_separation_mm} mm separation; "
                "too many pits for the imaged surface"
            )
        phase = tuple(rough_rng.uniform(0, 2 * math.pi, size=3).tolist())
        pits.append(PitTruth(len(pits), birth_drive, frame_index, pixel, centroid, params, phase))
    return GroundTruth(config, spec, cal, tuple(pits), times)


def _separated(cfg, spec, centroid, size_end, other: PitTruth, t_end) -> bool:
    other_end = max(pit_trajectory(other.params, max(t_end, other.params.birth_time)))
    need = max(cfg.min_separation_mm, (size_end + other_end) / 2 * (1 + cfg.boundary_roughness) + 0.1)
    return centroid.distance(other.centroid, spec.circumference_mm) >= need


@lru_cache(maxsize=64)
def _texture(texture_seed: int, frame_index: int, height: int, width: int) -> np.ndarray:
    rng = np.random.default_rng([texture_seed, frame_index])
    coarse = rng.uniform(-1, 1, size=(height // 48 + 3, width // 48 + 3)).astype(np.float32)
    fine = rng.uniform(-1, 1, size=(height // 12 + 3, width // 12 + 3)).astype(np.float32)
    tex = 150 + 12 * cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC)
    tex += 3 * cv2.resize(fine, (width, height), interpolation=cv2.INTER_LINEAR)
    tex = np.rint(np.clip(tex, 70, 230)).astype(np.int16)
    tex.setflags(write=False)
    return tex


_NOISE_BANK_SIZE = 4
_NOISE_PAD = 128


@lru_cache(maxsize=4)
def _noise_bank(seed: int, height: int, width: int, sigma: float) -> np.ndarray:
    rng = np.random.default_rng([seed, 0x5EED])
    shape = (_NOISE_BANK_SIZE, height + _NOISE_PAD, width + _NOISE_PAD)
    bank = np.rint(sigma * rng.standard_normal(shape, dtype=np.float32)).astype(np.int16)
    bank.setflags(write=False)
    return bank


def _noise_crop(cfg: ScenarioConfig, drive_index: int, frame_index: int) -> np.ndarray:
    """Zero-mean Gaussian noise for one frame.

    A randomly offset window into a small per-scenario bank of noise fields.
    """
    bank = _noise_bank(cfg.seed, cfg.height_px, cfg.width_px, float(cfg.noise_sigma))
    rng = np.random.default_rng([cfg.seed, drive_index, frame_index])
    k, dr, dc = rng.integers(0, [_NOISE_BANK_SIZE, _NOISE_PAD, _NOISE_PAD])
    return bank[k, dr : dr + cfg.height_px, dc : dc + cfg.width_px]


def reference_texture(truth: GroundTruth, frame_index: int) -> np.ndarray:
    cfg = truth.config
    return _texture(cfg.texture, frame_index, cfg.height_px, cfg.width_px)


def _draw_pit(img: np.ndarray, center: tuple[float, float], semi_rows: float, semi_cols: float,
              darkness: float, roughness: float, phase: tuple[float, ...]) -> None:
    reach = 1 + roughness
    r0 = max(0, math.floor(center[0] - semi_rows * reach) - 1)
    r1 = min(img.shape[0], math.ceil(center[0] + semi_rows * reach) + 2)
    c0 = max(0, math.floor(center[1] - semi_cols * reach) - 1)
    c1 = min(img.shape[1], math.ceil(center[1] + semi_cols * reach) + 2)
    if r0 >= r1 or c0 >= c1:
        return
    dr = (np.arange(r0, r1, dtype=np.float64) - center[0])[:, None] / max(semi_rows, 1e-9)
    dc = (np.arange(c0, c1, dtype=np.float64) - center[1])[None, :] / max(semi_cols, 1e-9)
    rho2 = dr * dr + dc * dc
    area = math.pi * semi_rows * semi_cols
    if roughness > 0:
        def boundary(theta):
            wobble = sum(np.sin((k + 3) * theta + ph) for k, ph in enumerate(phase))
            return (1 + roughness * wobble / max(len(phase), 1)) ** 2
        rho2 = rho2 / boundary(np.arctan2(dr, dc))
        area *= float(np.mean(boundary(np.linspace(0, 2 * np.pi, 720, endpoint=False))))
    # area-preserving rasterisation: darken the round(area) pixels nearest the centre in
    # normalised radius, so the pixel count matches the analytic area to half a pixel
    k = min(int(round(area)), rho2.size)
    inside = np.zeros(rho2.shape, dtype=bool)
    inside.flat[np.argsort(rho2, axis=None, kind="stable")[:k]] = True
    patch = img[r0:r1, c0:c1]
    patch[inside] = np.rint(patch[inside] * darkness).astype(patch.dtype)


def render_drive(
    truth: GroundTruth,
    drive_index: int,
    cal: Calibration | None = None,
    spec: SpindleSpec | None = None,
) -> tuple[dict[int, np.ndarray], DriveMeta]:
    """Render all frames of one drive as 8-bit grayscale images."""
    cfg = truth.config
    if not 0 <= drive_index < cfg.n_drives:
        raise ScenarioError(f"drive_index {drive_index} outside [0, {cfg.n_drives})")
    cal = cal or truth.calibration
    spec = spec or truth.spindle
    by_frame: dict[int, list[PitTruth]] = {}
    for pit in truth.live_pits(drive_index):
        by_frame.setdefault(pit.frame_index, []).append(pit)
    frames = {}
    for f in range(cfg.frames_per_drive):
        img = reference_texture(truth, f).copy()
        ref = FrameRef.at(drive_index, f, cal.angular_step_deg, cfg.width_px, cfg.height_px)
        for pit in by_frame.get(f, ()):
            a, b, _ = truth.size_at(pit, drive_index)
            row, col = surface_to_frame(cal, spec, ref, pit.centroid)
            semi_ax, semi_tg = a / 2 / cal.mm_per_px, b / 2 / cal.mm_per_px
            semi_rows, semi_cols = (semi_ax, semi_tg) if cal.axial_axis == "rows" else (semi_tg, semi_ax)
            if not (0 <= row - semi_rows and row + semi_rows <= cfg.height_px - 1
                    and 0 <= col - semi_cols and col + semi_cols <= cfg.width_px - 1):
                log.warning("pit %d outside imaged strip at drive %d; skipped", pit.pit_id, drive_index)
                continue
            _draw_pit(img, (row, col), semi_rows, semi_cols, cfg.pit_darkness,
                      cfg.boundary_roughness, pit.roughness_phase)
        if cfg.noise_sigma > 0:
            img += _noise_crop(cfg, drive_index, f)
        np.clip(img, 0, 255, out=img)
        frames[f] = img.astype(np.uint8)
    return frames, truth.drive_meta(drive_index)
