import json
from pathlib import Path

import numpy as np
import pytest

from keywarp.demo import (ImageScene, NoWaypoints, SceneSnapshot,
                          SchemaError, SemanticScene, Trajectory,
                          decode_summary, encode_summary, extract_waypoints,
                          load_demo_summaries, save_demo_library,
                          summarize_demo, trajectory_from_parts)
from keywarp.geometry import NonPositiveDepth, project
from keywarp.sim import generate_seed_demos
from keywarp.tasks import builtin_tasks

GOLDEN = Path(__file__).parent / "data" / "golden_summary.json"


def _traj_from_bits(bits, rng=None):
    n = len(bits)
    rng = rng or np.random.default_rng(0)
    positions = rng.uniform(-0.2, 0.2, (n, 3)) + [0.45, 0.0, 0.2]
    quats = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    return trajectory_from_parts(positions, quats, np.array(bits, float))


def test_extract_waypoints_toggle_example():
    traj = _traj_from_bits([0, 0, 1, 1, 1, 0])
    idx, w = extract_waypoints(traj)
    assert idx.tolist() == [2, 5]
    assert np.array_equal(w, traj.positions[[2, 5]])


def test_extract_waypoints_requires_a_toggle():
    with pytest.raises(NoWaypoints):
        extract_waypoints(_traj_from_bits([0, 0, 0, 0]))


def test_waypoint_count_matches_brute_force_scan():
    rng = np.random.default_rng(9)
    for _ in range(50):
        bits = (rng.random(rng.integers(2, 40)) < 0.4).astype(int)
        traj = _traj_from_bits(bits.tolist(), rng)
        brute = sum(1 for i in range(1, len(bits)) if bits[i] != bits[i - 1])
        if brute == 0:
            with pytest.raises(NoWaypoints):
                extract_waypoints(traj)
        else:
            idx, _ = extract_waypoints(traj)
            assert len(idx) == brute


def test_scripted_demo_has_grasp_and_release_waypoints(layout):
    task = builtin_tasks()[0]
    demos, sidecars = generate_seed_demos(layout, task, n=2, seed=4)
    grasp_offset = np.asarray(layout.object_spec(task.obj).grasp_offset)
    for demo in demos:
        assert demo.num_waypoints == 2
        g = demo.actions.gripper
        # close then open
        assert g[demo.waypoint_indices[0]] == 1
        assert g[demo.waypoint_indices[1]] == 0
        # the grasp waypoint sits exactly on the staged object's grasp point
        obj_pos = np.array(demo.snapshot.content.objects[task.obj].position)
        assert np.allclose(demo.waypoints[0], obj_pos + grasp_offset, atol=1e-12)
        # the release waypoint matches the recorded destination annotation
        side = sidecars[demo.id]["initial"]["annotations"]
        release = next(a for a in side
                       if a["view"] == "left" and a["anchor"] == task.dest)
        anchor_pos = np.array(demo.snapshot.content.anchors[task.dest])
        assert np.allclose(demo.waypoints[1], anchor_pos + release["offset"],
                           atol=1e-12)


def test_summary_keypoints_are_projections(library):
    for demo in library.demos.values():
        for view in ("left", "right"):
            cam = demo.snapshot.rig.camera(view)
            expected = np.array([project(cam, w) for w in demo.waypoints])
            assert np.max(np.abs(expected - demo.keypoints[view])) < 1e-9


def test_summary_waypoints_equal_actions_at_indices(library):
    for demo in library.demos.values():
        assert np.array_equal(demo.waypoints,
                              demo.actions.positions[demo.waypoint_indices])


def test_waypoint_behind_camera_raises(layout):
    bits = [0, 0, 1, 1, 0]
    n = len(bits)
    positions = np.tile([0.45, 0.0, 0.1], (n, 1))
    positions[2] = [-0.2, -5.0, 0.5]   # behind both cameras
    quats = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    traj = trajectory_from_parts(positions, quats, np.array(bits, float))
    content = SemanticScene(objects={}, anchors={})
    snap = SceneSnapshot(rig=layout.rig, content=content)
    with pytest.raises(NonPositiveDepth):
        summarize_demo(traj, snap, "task", "demo")


def test_roundtrip_is_field_exact(library):
    for demo in list(library.demos.values())[:5]:
        clone = decode_summary(encode_summary(demo))
        assert clone == demo
        assert np.array_equal(clone.actions.actions, demo.actions.actions)


def test_image_scene_roundtrip(layout):
    bits = [0, 1]
    positions = np.tile([0.45, 0.0, 0.1], (2, 1))
    quats = np.tile([1.0, 0.0, 0.0, 0.0], (2, 1))
    traj = trajectory_from_parts(positions, quats, np.array(bits, float))
    content = ImageScene(left=b"left-bytes", right=b"right-bytes",
                         width=640, height=480)
    snap = SceneSnapshot(rig=layout.rig, content=content)
    demo = summarize_demo(traj, snap, "task", "img-demo")
    clone = decode_summary(encode_summary(demo))
    assert clone.snapshot.content.left == b"left-bytes"
    assert clone.snapshot.content.width == 640


def test_truncated_bytes_raise_schema_error(library):
    payload = encode_summary(next(iter(library.demos.values())))
    with pytest.raises(SchemaError):
        decode_summary(payload[: len(payload) // 2])


def test_schema_error_names_the_field(library):
    doc = json.loads(encode_summary(next(iter(library.demos.values()))))
    doc["actions"][3] = [1.0, 2.0]
    with pytest.raises(SchemaError, match=r"actions\[3\]"):
        decode_summary(json.dumps(doc).encode())
    del doc["actions"]
    with pytest.raises(SchemaError, match="actions"):
        decode_summary(json.dumps(doc).encode())


def test_schema_error_on_bad_rig(library):
    doc = json.loads(encode_summary(next(iter(library.demos.values()))))
    doc["rig"]["left"]["intrinsics"]["fx"] = "wide"
    with pytest.raises(SchemaError, match="rig.left.intrinsics.fx"):
        decode_summary(json.dumps(doc).encode())


def test_golden_file_decodes_and_reencodes():
    """Golden file generated once and audited against the documented schema."""
    payload = GOLDEN.read_bytes()
    doc = json.loads(payload)
    assert set(doc) == {"id", "task_id", "control_rate_hz", "rig", "snapshot",
                        "waypoint_indices", "waypoints", "keypoints", "actions"}
    assert set(doc["rig"]) == {"left", "right"}
    assert set(doc["keypoints"]) == {"left", "right"}
    assert doc["snapshot"]["variant"] in {"semantic", "images"}
    assert all(len(row) == 8 for row in doc["actions"])
    summary = decode_summary(payload)
    assert summary.num_waypoints == len(doc["waypoint_indices"]) == 2
    assert len(summary.actions) == len(doc["actions"]) == 120
    assert encode_summary(summary) == payload


def test_library_save_load_roundtrip(tmp_path, library):
    demos = sorted(library.demos.values(), key=lambda d: d.id)[:4]
    save_demo_library(tmp_path / "lib", demos)
    loaded = load_demo_summaries(tmp_path / "lib")
    assert [d.id for d in loaded] == [d.id for d in demos]
    assert all(a == b for a, b in zip(loaded, demos))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((1, 8)))          # too short
    bad = np.zeros((3, 8))
    bad[:, 3] = 1.0
    bad[1, 7] = 0.5                            # non-binary gripper
    with pytest.raises(ValueError):
        Trajectory(bad)
    good = np.zeros((3, 8))
    good[:, 3] = 1.0
    with pytest.raises(ValueError):
        Trajectory(good, control_rate=0.0)
