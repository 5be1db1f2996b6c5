import json
import os
import shutil

import cv2
import numpy as np
import pytest

from pitwear.pipeline import measure_dataset, run_tracking
from pitwear.segment import SegmentationParams
from pitwear.store import (
    DataError,
    frame_path,
    load_dataset,
    read_observations,
    read_tracks,
    write_drive,
    write_outputs,
    write_spindle,
)
from pitwear.synth import ScenarioConfig, generate_scenario, render_drive

CFG = ScenarioConfig(seed=5, n_drives=12, width_px=160, height_px=120, frames_per_drive=3,
                     birth_rates=(0.5, 1.0, 1.0), min_separation_mm=1.5)


def write_scenario(root, cfg=CFG):
    truth = generate_scenario(cfg)
    write_spindle(root, truth.spindle, cfg.load(truth.spindle), truth.calibration, True, cfg.failure)
    for d in range(cfg.n_drives):
        frames, meta = render_drive(truth, d)
        write_drive(root, meta, frames, truth.calibration.angular_step_deg)
    return truth


@pytest.fixture(scope="module")
def dataset_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    write_scenario(root)
    return root


def copy_of(src, tmp_path):
    dst = tmp_path / "copy"
    shutil.copytree(src, dst)
    return dst


def test_load_round_trip_is_lossless(dataset_root):
    truth = generate_scenario(CFG)
    ds = load_dataset(dataset_root)
    assert len(ds.drives) == CFG.n_drives
    assert ds.drives == [truth.drive_meta(d) for d in range(CFG.n_drives)]
    assert ds.spindle == truth.spindle
    assert ds.calibration == truth.calibration
    assert ds.load == CFG.load(truth.spindle)
    assert ds.failed and ds.failure_drive == CFG.failure == ds.end_drive
    assert [f.frame_index for f in ds.frames[0]] == [0, 1, 2]


def test_missing_spindle_file(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    os.remove(root / "spindle.json")
    with pytest.raises(DataError, match="spindle.json"):
        load_dataset(root)


def test_schema_violation_names_field(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    doc = json.loads((root / "spindle.json").read_text())
    del doc["spindle"]["lead_mm"]
    (root / "spindle.json").write_text(json.dumps(doc))
    with pytest.raises(DataError, match="lead_mm"):
        load_dataset(root)


def test_frame_dimension_mismatch(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    cv2.imwrite(str(frame_path(root, 3, 1)), np.zeros((10, 10), np.uint8))
    with pytest.raises(DataError, match="frame_001"):
        load_dataset(root)


def test_missing_frame_image(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    os.remove(frame_path(root, 2, 0))
    with pytest.raises(DataError, match="frame_000"):
        load_dataset(root)


def test_observation_and_track_files_round_trip(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    ds = load_dataset(root)
    obs = measure_dataset(ds, SegmentationParams())
    assert obs
    tracks = run_tracking(obs, ds.spindle)
    write_outputs(ds, observations=obs, tracks=tracks)
    assert read_observations(ds.out_dir / "observations.csv", ds) == obs
    assert read_tracks(ds.out_dir / "tracks.json", ds) == tracks


def test_empty_outputs_are_valid(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    ds = load_dataset(root)
    write_outputs(ds, observations=[], tracks=[])
    assert json.loads((ds.out_dir / "tracks.json").read_text()) == []
    assert read_observations(ds.out_dir / "observations.csv") == []


def test_identical_runs_identical_bytes(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    ds = load_dataset(root)
    blobs = []
    for _ in range(2):
        obs = measure_dataset(ds, SegmentationParams(), jobs=2)
        write_outputs(ds, observations=obs, tracks=run_tracking(obs, ds.spindle))
        blobs.append([(ds.out_dir / n).read_bytes() for n in ("observations.csv", "tracks.json")])
    assert blobs[0] == blobs[1]


def test_unwritable_output(dataset_root, tmp_path):
    root = copy_of(dataset_root, tmp_path)
    ds = load_dataset(root)
    (root / "out").write_text("not a directory")
    with pytest.raises(DataError):
        write_outputs(ds, tracks=[])
