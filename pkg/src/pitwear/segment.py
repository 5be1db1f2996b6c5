"""Pitting detection by differencing against the pristine drive-0 frames.

Pipeline per frame::

    blur -> |frame - reference| -> threshold (fixed or Otsu) -> closing
         -> connected components -> size filter -> measure_region

OpenCV does the pixel work; everything operates on 8-bit grayscale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping, Union

import cv2
import numpy as np

from .calib import Calibration, area_scale, frame_to_surface
from .model import FrameRef, PitObservation, SpindleSpec


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentationParams:
    """Detection parameters.

    ``diff_threshold`` is an absolute intensity level or ``"auto"`` (Otsu on
    the difference image). An Otsu threshold is never allowed below
    ``min_contrast``; without that floor a defect-free frame would be split
    into noise blobs.
    """

    blur_radius_px: int = 2
    diff_threshold: Union[float, Literal["auto"]] = "auto"
    min_region_px: int = 25
    closing_radius_px: int = 2
    connectivity: int = 8
    min_contrast: float = 12.0

    def violations(self) -> tuple[str, ...]:
        out = []
        if self.blur_radius_px < 0:
            out.append("blur_radius_px must be >= 0")
        if self.diff_threshold != "auto" and not (0 <= float(self.diff_threshold) <= 255):
            out.append("diff_threshold must be 'auto' or within [0, 255]")
        if self.min_region_px < 1:
            out.append("min_region_px must be >= 1")
        if self.closing_radius_px < 0:
            out.append("closing_radius_px must be >= 0")
        if self.connectivity not in (4, 8):
            out.append("connectivity must be 4 or 8")
        if not 0 <= self.min_contrast <= 255:
            out.append("min_contrast must be within [0, 255]")
        return tuple(out)

    def check(self) -> "SegmentationParams":
        problems = self.violations()
        if problems:
            raise SegmentationError("SegmentationParams: " + "; ".join(problems))
        return self


def to_gray(image: np.ndarray) -> np.ndarray:
    """8-bit grayscale; colour input is assumed BGR (OpenCV order) and luma-weighted."""
    if image.ndim == 3:
        if image.shape[2] == 4:
            image = cv2.cvtColor(image, cv2.COLOR_BGRA2GRAY)
        else:
            image = cv2.cvtColor(image, cv2.COLOR_BGR2GRAY)
    if image.dtype != np.uint8:
        image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    return image


def _blur(image: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return image
    k = 2 * radius + 1
    return cv2.GaussianBlur(image, (k, k), 0, borderType=cv2.BORDER_REPLICATE)


@dataclass(frozen=True)
class ReferenceMap:
    """Blurred drive-0 frames keyed by frame position."""

    images: Mapping[int, np.ndarray]
    blur_radius_px: int

    def __len__(self) -> int:
        return len(self.images)

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.images.values())).shape


def build_reference(
    drive0_frames: Mapping[int, np.ndarray] | Iterable[tuple[int, np.ndarray]],
    blur_radius_px: int = 2,
) -> ReferenceMap:
    """Build the reference map from drive-0 frames.

    Accepts a mapping or an iterable of ``(frame_index, image)`` pairs; the
    latter form is checked for duplicate keys.
    """
    items = list(drive0_frames.items()) if isinstance(drive0_frames, Mapping) else list(drive0_frames)
    if not items:
        raise SegmentationError("no drive-0 frames given")
    refs: dict[int, np.ndarray] = {}
    shape = None
    for idx, img in items:
        if idx in refs:
            raise SegmentationError(f"duplicate frame_index {idx}")
        gray = to_gray(np.asarray(img))
        if shape is None:
            shape = gray.shape
        elif gray.shape != shape:
            raise SegmentationError(
                f"frame_index {idx} has shape {gray.shape}, expected {shape}"
            )
        ref = _blur(gray, blur_radius_px)
        if ref is img:
            ref = ref.copy()
        ref.setflags(write=False)
        refs[idx] = ref
    return ReferenceMap(dict(sorted(refs.items())), blur_radius_px)


def measure_region(
    region_pixels: np.ndarray | Iterable[tuple[int, int]],
    frame: FrameRef,
    cal: Calibration,
    spec: SpindleSpec,
) -> PitObservation:
    """Axis-aligned extents, pixel-count area and centroid of one region."""
    px = np.asarray(
        region_pixels if isinstance(region_pixels, np.ndarray) else list(region_pixels),
        dtype=np.int64,
    ).reshape(-1, 2)
    if len(px) == 0:
        raise SegmentationError("empty region")
    rows, cols = px[:, 0], px[:, 1]
    row_extent = int(rows.max() - rows.min() + 1)
    col_extent = int(cols.max() - cols.min() + 1)
    axial_px, tang_px = (row_extent, col_extent) if cal.axial_axis == "rows" else (col_extent, row_extent)
    centroid = frame_to_surface(cal, spec, frame, (float(rows.mean()), float(cols.mean())))
    return PitObservation(
        drive_index=frame.drive_index,
        frame=frame,
        centroid=centroid,
        axial_length_mm=axial_px * cal.mm_per_px,
        tangential_length_mm=tang_px * cal.mm_per_px,
        area_mm2=len(px) * area_scale(cal),
        pixel_count=len(px),
    )


def difference_mask(
    frame_image: np.ndarray, reference: np.ndarray, params: SegmentationParams
) -> np.ndarray:
    """Binary (0/1 uint8) pitting mask before component filtering."""
    gray = _blur(to_gray(frame_image), params.blur_radius_px)
    diff = cv2.absdiff(gray, reference)
    if params.diff_threshold == "auto":
        otsu, _ = cv2.threshold(diff, 0, 1, cv2.THRESH_BINARY | cv2.THRESH_OTSU)
        level = max(otsu, params.min_contrast)
    else:
        level = float(params.diff_threshold)
    # diff is integral, so diff >= level  <=>  diff > ceil(level) - 1
    _, mask = cv2.threshold(diff, math.ceil(level) - 1, 1, cv2.THRESH_BINARY)
    if params.closing_radius_px > 0:
        k = 2 * params.closing_radius_px + 1
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (k, k))
        mask = cv2.morphologyEx(mask, cv2.MORPH_CLOSE, kernel, borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return mask


def segment_frame(
    frame_image: np.ndarray,
    frame: FrameRef,
    ref: ReferenceMap,
    params: SegmentationParams,
    cal: Calibration,
    spec: SpindleSpec,
) -> list[PitObservation]:
    if frame.frame_index not in ref.images:
        raise SegmentationError(f"no reference for frame_index {frame.frame_index}")
    reference = ref.images[frame.frame_index]
    image = np.asarray(frame_image)
    if image.shape[:2] != reference.shape:
        raise SegmentationError(
            f"frame {frame.frame_index} of drive {frame.drive_index} has shape "
            f"{image.shape[:2]}, reference is {reference.shape}"
        )
    mask = difference_mask(image, reference, params)
    # labelling only the bounding box of foreground pixels keeps defect-free frames cheap
    x0, y0, bw, bh = cv2.boundingRect(mask)
    if bw == 0 or bh == 0:
        return []
    n, labels, stats, _ = cv2.connectedComponentsWithStats(
        np.ascontiguousarray(mask[y0 : y0 + bh, x0 : x0 + bw]), connectivity=params.connectivity
    )
    observations = []
    for k in range(1, n):
        x, y, w, h, count = stats[k]
        if count < params.min_region_px:
            continue
        rr, cc = np.nonzero(labels[y : y + h, x : x + w] == k)
        pixels = np.column_stack((rr + y + y0, cc + x + x0))
        observations.append(measure_region(pixels, frame, cal, spec))
    observations.sort(key=lambda o: (o.centroid.axial_mm, o.centroid.tangential_mm))
    return observations
