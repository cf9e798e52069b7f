import itertools

import numpy as np
import pytest

from blindspot.geometry import iou, BoundingBox
from blindspot.scenario import (
    Camera,
    ConfigError,
    NoiseModel,
    ScenarioConfig,
    cyclist_corners,
    export_replay,
    generate_track,
    ground_truth,
    load_scenario_config,
    project_box,
    scenario_from_mapping,
)
from oracles import project_points_oracle

DEFAULT = ScenarioConfig()


@pytest.fixture(scope="module")
def track():
    return generate_track(DEFAULT)


def upright(x, y, w=2.0, h=6.0):
    return np.array([[x, y - w / 2, 0], [x, y + w / 2, 0], [x, y + w / 2, h], [x, y - w / 2, h]], float)


def test_pinhole_halving():
    cam = Camera(0.0, 0.0, 3.0, 0.0, 0.0)
    near = project_box(cam, upright(20.0, 0.0))
    far = project_box(cam, upright(40.0, 0.0))
    assert far.height / near.height == pytest.approx(0.5, rel=0.01)
    assert far.width / near.width == pytest.approx(0.5, rel=0.01)


def test_behind_camera_not_visible():
    cam = Camera(0.0, 0.0, 3.0, 0.0, 0.0)
    assert project_box(cam, upright(-10.0, 0.0)) is None
    # straddling the camera plane: clipped, still tiny-or-visible but never inverted
    box = project_box(cam, np.array([[-5, -1, 0], [5, -1, 0], [5, -1, 6], [-5, -1, 6.0]]))
    assert box is None or box.x_min <= box.x_max


def test_camera_poses():
    a, b, c = (DEFAULT.camera(p) for p in "ABC")
    assert (a.x, a.y, a.z, a.yaw_deg) == (0.0, 0.0, 5.0, 180.0)
    assert (b.x, b.z, b.yaw_deg) == (-40.0, 13.0, 0.0)
    assert (c.x, c.z, c.yaw_deg) == (-80.0, 13.0, 0.0)
    with pytest.raises(ConfigError):
        DEFAULT.camera("Z")


def test_track_matches_projection_oracle(track):
    checked = 0
    for placement in "ABC":
        cam = DEFAULT.camera(placement)
        for fid, box in enumerate(track.boxes[placement]):
            corners = cyclist_corners(track.cyclist_x[fid], DEFAULT.cyclist_lateral_offset)
            uv, depth = project_points_oracle(
                corners, (cam.x, cam.y, cam.z), cam.yaw_deg, cam.pitch_deg, cam.hfov_deg, cam.width, cam.height
            )
            fully_visible = depth.min() > 0.5 and uv.min() > 0 and uv.max() < 1
            if not fully_visible:
                continue
            lo, hi = uv.min(axis=0), uv.max(axis=0)
            size_px = (hi - lo) * (cam.width, cam.height)
            if size_px.min() < DEFAULT.min_box_px:
                assert box is None
                continue
            np.testing.assert_allclose(box.as_tuple(), (lo[0], lo[1], hi[0], hi[1]), atol=1e-6)
            np.testing.assert_allclose(box.center, (lo + hi) / 2, atol=1e-6)
            checked += 1
    assert checked > 100


def test_each_placement_sees_the_cyclist(track):
    assert track.num_frames == 240
    for placement in "ABC":
        assert sum(track.visible(placement)) > 30


def unclipped(box):
    return box is not None and 0 < box.x_min and box.x_max < 1 and 0 < box.y_min and box.y_max < 1


def test_box_size_tracks_range(track):
    # A looks back at the approaching cyclist: boxes grow; C watches it ride away: boxes shrink
    a = [b.height for b in track.boxes["A"] if unclipped(b)]
    c = [b.height for b in track.boxes["C"] if unclipped(b)]
    assert all(y >= x for x, y in zip(a, a[1:]))
    assert all(y <= x for x, y in zip(c, c[1:]))


def test_generation_is_deterministic(track):
    again = generate_track(DEFAULT)
    assert again.boxes == track.boxes and again.cyclist_x == track.cyclist_x


def test_export_zero_noise_is_identity(track):
    replay = export_replay(track, "A")
    gt = ground_truth(track, "A")
    for fid in range(track.num_frames):
        got = [d.box for d in replay.lookup(fid)]
        assert got == gt[fid]
        assert all(d.score == 1.0 for d in replay.lookup(fid))


def test_export_drop_all(track):
    replay = export_replay(track, "B", NoiseModel(drop_rate=1.0))
    assert all(not replay.lookup(f) for f in range(track.num_frames))


def test_export_jitter_bounded_and_seeded(track):
    noise = NoiseModel(jitter_px=2.0, score_model="uniform:0.6:0.9")
    r1 = export_replay(track, "C", noise, seed=5)
    r2 = export_replay(track, "C", noise, seed=5)
    r3 = export_replay(track, "C", noise, seed=6)
    w, h = DEFAULT.image_width, DEFAULT.image_height
    moved = False
    for fid, box in enumerate(track.boxes["C"]):
        assert r1.lookup(fid) == r2.lookup(fid)
        if box is None:
            continue
        (det,) = r1.lookup(fid)
        assert 0.6 <= det.score <= 0.9
        for a, b, scale in zip(det.box.as_tuple(), box.as_tuple(), (w, h, w, h)):
            assert abs(a - b) * scale <= 2.0 + 1e-9
        moved |= r1.lookup(fid) != r3.lookup(fid)
    assert moved


def test_jitter_keeps_iou_above_half_at_min_box():
    # worst case over a grid of per-side offsets for boxes at the visibility floor
    steps = np.linspace(-2, 2, 9)
    for h in (16, 24, 48):
        base = BoundingBox(0, 0, 16, h)
        worst = min(
            iou(base, BoundingBox(d0, d1, 16 + d2, h + d3))
            for d0, d1, d2, d3 in itertools.product(steps, repeat=4)
        )
        assert worst > 0.5


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError) as err:
        scenario_from_mapping({"frame_rate": "0", "hfov_deg": "200", "bogus": "1"})
    text = "; ".join(err.value.problems)
    assert "bogus" in text
    with pytest.raises(ConfigError) as err:
        scenario_from_mapping({"frame_rate": "0", "hfov_deg": "200"})
    assert {p.split(":")[0] for p in err.value.problems} == {"scenario.frame_rate", "scenario.hfov_deg"}
    with pytest.raises(ConfigError):
        NoiseModel(drop_rate=1.5).validate()
    with pytest.raises(ConfigError):
        NoiseModel(score_model="gauss:1").validate()
    ini = tmp_path / "s.ini"
    ini.write_text("[scenario]\ncyclist_speed = 10\nduration = 2\n")
    cfg = load_scenario_config(ini)
    assert cfg.cyclist_speed == 10.0 and cfg.num_frames == 60
