from dataclasses import replace

import pytest

from pitwear.model import (
    AnalysisSeries,
    DriveMeta,
    EolPolicy,
    FrameRef,
    InvariantError,
    LoadSpec,
    SurfaceCoord,
    drive_sequence_violations,
    default_spindle,
    validate_spec,
)

from conftest import make_drives, make_obs, make_track


def test_default_spindle_is_valid():
    result = validate_spec(default_spindle())
    assert result.ok and result.violations == ()


def test_zero_diameter_has_exactly_one_violation():
    result = validate_spec(replace(default_spindle(), diameter_mm=0))
    assert not result.ok
    assert len(result.violations) == 1
    assert "diameter_mm" in result.violations[0]


def test_ball_larger_than_spindle_is_invalid():
    result = validate_spec(replace(default_spindle(), ball_diameter_mm=40))
    assert not result.ok
    assert any("ball_diameter_mm" in v for v in result.violations)


def test_check_raises_on_violation():
    with pytest.raises(InvariantError):
        replace(default_spindle(), lead_mm=-1).check()
    with pytest.raises(InvariantError):
        LoadSpec(0, 400).check()
    with pytest.raises(InvariantError):
        EolPolicy(0, 3.969).check()


def test_circumference():
    assert default_spindle().circumference_mm == pytest.approx(100.53096491487338)


def test_drive_meta_round_trip():
    for d in make_drives(3):
        assert DriveMeta.from_dict(d.to_dict()) == d


def test_drive_sequence_violations():
    drives = make_drives(3)
    assert drive_sequence_violations(drives) == ()
    assert drive_sequence_violations([drives[1], drives[0]])
    shrinking = [drives[0], replace(drives[1], cumulative_revolutions=-1.0)]
    assert drive_sequence_violations(shrinking)


def test_frame_ref_rotation_matches_step():
    assert FrameRef.at(0, 3).rotation_step_deg == 67.5
    assert FrameRef.at(0, 3).violations() == ()
    assert FrameRef(0, 3, 10.0).violations()


def test_surface_distance_wraps_tangentially():
    a, b = SurfaceCoord(0, 1), SurfaceCoord(0, 99)
    assert a.distance(b) == pytest.approx(98)
    assert a.distance(b, 100) == pytest.approx(2)


def test_observation_area_bounded_by_box():
    assert make_obs(0, a=1, b=1, area=0.5).violations() == ()
    assert make_obs(0, a=1, b=1, area=1.5).violations()


def test_track_invariants():
    good = make_track(0, [make_obs(0), make_obs(2)])
    assert good.violations() == ()
    assert not good.merged
    bad_order = make_track(0, [make_obs(2), make_obs(1)])
    assert bad_order.violations()
    assert replace(good, birth_drive=1).violations()


def test_series_invariants():
    ok = AnalysisSeries.from_arrays("s", [0, 0.5, 1], [1, 2, 3], "mm")
    assert ok.violations() == ()
    assert ok.times == [0, 0.5, 1]
    assert AnalysisSeries.from_arrays("s", [0, 0], [1, 2], "mm").violations()
    assert AnalysisSeries.from_arrays("s", [0, 1], [1, float("nan")], "mm").violations()
