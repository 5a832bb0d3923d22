"""Trajectories, waypoint extraction, and demonstration summaries.

A demonstration is summarized once into (initial scene snapshot, 3-D
waypoints at gripper-toggle frames, their pixel keypoints in both camera
views, full action sequence); afterwards the raw recording can be thrown
away. Summaries serialize to a stable JSON schema, one file per demo, with
a directory-level index forming a demo library.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Camera, CameraIntrinsics, StereoRig, UNIT_TOL, project

ACTION_DIM = 8   # x y z qw qx qy qz gripper
DEFAULT_CONTROL_RATE = 15.0


class NoWaypoints(ValueError):
    """Gripper never toggles; the demo cannot be summarized."""


class SchemaError(ValueError):
    """Malformed serialized summary; message carries the field path."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Action sequence as an (M, 8) array: position, wxyz quaternion, gripper bit."""

    actions: np.ndarray
    control_rate: float = DEFAULT_CONTROL_RATE

    def __post_init__(self):
        a = np.array(self.actions, dtype=float)
        if a.ndim != 2 or a.shape[1] != ACTION_DIM:
            raise ValueError(f"actions must be (M, {ACTION_DIM}), got {a.shape}")
        if a.shape[0] < 2:
            raise ValueError("a trajectory needs at least 2 actions")
        if not self.control_rate > 0:
            raise ValueError("control_rate must be positive")
        if not np.all(np.isfinite(a)):
            raise ValueError("actions must be finite")
        norms = np.linalg.norm(a[:, 3:7], axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValueError("orientations must be unit quaternions")
        g = a[:, 7]
        if not np.all((g == 0.0) | (g == 1.0)):
            raise ValueError("gripper column must be binary")
        a.flags.writeable = False
        object.__setattr__(self, "actions", a)

    def __len__(self):
        return self.actions.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.control_rate == other.control_rate
                and np.array_equal(self.actions, other.actions))

    @property
    def positions(self) -> np.ndarray:
        return self.actions[:, 0:3]

    @property
    def orientations(self) -> np.ndarray:
        return self.actions[:, 3:7]

    @property
    def gripper(self) -> np.ndarray:
        return self.actions[:, 7].astype(int)


def trajectory_from_parts(positions, orientations, gripper,
                          control_rate=DEFAULT_CONTROL_RATE) -> Trajectory:
    positions = np.asarray(positions, dtype=float)
    orientations = np.asarray(orientations, dtype=float)
    gripper = np.asarray(gripper, dtype=float).reshape(-1, 1)
    return Trajectory(np.hstack([positions, orientations, gripper]), control_rate)


# ---------------------------------------------------------------------------
# scene snapshots

@dataclass(frozen=True)
class ObjectState:
    position: tuple   # (x, y, z)
    upright: bool = True


def semantic_state_id(objects, anchors) -> str:
    parts = []
    for name in sorted(objects):
        o = objects[name]
        parts.append(f"{name}:{o.position[0]!r},{o.position[1]!r},{o.position[2]!r},{int(o.upright)}")
    for name in sorted(anchors):
        p = anchors[name]
        parts.append(f"@{name}:{p[0]!r},{p[1]!r},{p[2]!r}")
    return hashlib.blake2b("|".join(parts).encode(), digest_size=12).hexdigest()


@dataclass(frozen=True)
class SemanticScene:
    """Simulator-side snapshot content: object poses plus static anchor points.

    state_id is derived from the content, so snapshots of identical scenes
    compare (and match) equal.
    """

    objects: dict            # id -> ObjectState
    anchors: dict            # name -> (x, y, z) static reference point
    state_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "objects", dict(self.objects))
        object.__setattr__(self, "anchors",
                           {k: tuple(float(c) for c in v) for k, v in self.anchors.items()})
        if not self.state_id:
            object.__setattr__(self, "state_id",
                               semantic_state_id(self.objects, self.anchors))


@dataclass(frozen=True)
class ImageScene:
    """Opaque per-view image blobs (for recordings made outside the simulator)."""

    left: bytes
    right: bytes
    width: int
    height: int

    @property
    def state_id(self) -> str:
        return hashlib.blake2b(self.left + self.right, digest_size=12).hexdigest()


@dataclass(frozen=True)
class SceneSnapshot:
    rig: StereoRig
    content: object   # SemanticScene | ImageScene

    @property
    def state_id(self) -> str:
        return self.content.state_id


# ---------------------------------------------------------------------------
# summaries

@dataclass(frozen=True, eq=False)
class DemoSummary:
    id: str
    task_id: str
    snapshot: SceneSnapshot
    waypoint_indices: np.ndarray   # (T,) strictly increasing frame indices
    waypoints: np.ndarray          # (T, 3)
    keypoints: dict                # view -> (T, 2) pixel array
    actions: Trajectory

    def __post_init__(self):
        idx = np.array(self.waypoint_indices, dtype=int)
        w = np.array(self.waypoints, dtype=float)
        if idx.ndim != 1 or len(idx) < 1:
            raise ValueError("need at least one waypoint")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("waypoint indices must be strictly increasing")
        if w.shape != (len(idx), 3):
            raise ValueError("waypoints must be (T, 3)")
        kp = {}
        for view in ("left", "right"):
            if view not in self.keypoints:
                raise ValueError(f"missing keypoints for view {view!r}")
            k = np.array(self.keypoints[view], dtype=float)
            if k.shape != (len(idx), 2):
                raise ValueError(f"keypoints[{view!r}] must be (T, 2)")
            k.flags.writeable = False
            kp[view] = k
        if not np.array_equal(w, self.actions.positions[idx]):
            raise ValueError("waypoints must equal the positions at their frames")
        idx.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "waypoint_indices", idx)
        object.__setattr__(self, "waypoints", w)
        object.__setattr__(self, "keypoints", kp)

    def __eq__(self, other):
        if not isinstance(other, DemoSummary):
            return NotImplemented
        return (self.id == other.id and self.task_id == other.task_id
                and self.snapshot.rig == other.snapshot.rig
                and self.snapshot.state_id == other.snapshot.state_id
                and np.array_equal(self.waypoint_indices, other.waypoint_indices)
                and np.array_equal(self.waypoints, other.waypoints)
                and all(np.array_equal(self.keypoints[v], other.keypoints[v])
                        for v in ("left", "right"))
                and self.actions == other.actions)

    @property
    def num_waypoints(self) -> int:
        return len(self.waypoint_indices)


def extract_waypoints(traj: Trajectory):
    """Frames where the gripper open/close bit toggles, with their positions.

    Returns (indices, waypoints). Raises NoWaypoints when the gripper never
    toggles; such demos are rejected rather than given synthetic waypoints.
    """
    g = traj.gripper
    idx = np.flatnonzero(g[1:] != g[:-1]) + 1
    if len(idx) == 0:
        raise NoWaypoints("gripper command never toggles")
    return idx, traj.positions[idx].copy()


def summarize_demo(traj: Trajectory, snapshot: SceneSnapshot, task_id: str,
                   demo_id: str) -> DemoSummary:
    """Build the compact demo record: waypoints plus their two-view keypoints."""
    idx, w = extract_waypoints(traj)
    keypoints = {}
    for view in ("left", "right"):
        cam = snapshot.rig.camera(view)
        keypoints[view] = np.array([project(cam, p) for p in w])
    return DemoSummary(id=demo_id, task_id=task_id, snapshot=snapshot,
                       waypoint_indices=idx, waypoints=w,
                       keypoints=keypoints, actions=traj)


# ---------------------------------------------------------------------------
# serialization

def _intrinsics_to_dict(k: CameraIntrinsics):
    return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "width": k.width, "height": k.height}


def _camera_to_dict(c: Camera):
    return {"intrinsics": _intrinsics_to_dict(c.intrinsics),
            "pose": {"position": c.position.tolist(),
                     "rotation": c.rotation.tolist()}}


def rig_to_dict(rig: StereoRig):
    return {"left": _camera_to_dict(rig.left), "right": _camera_to_dict(rig.right)}


def snapshot_content_to_dict(content):
    if isinstance(content, SemanticScene):
        return {"variant": "semantic",
                "payload": {"state_id": content.state_id,
                            "objects": {k: {"position": list(v.position),
                                            "upright": v.upright}
                                        for k, v in content.objects.items()},
                            "anchors": {k: list(v) for k, v in content.anchors.items()}}}
    if isinstance(content, ImageScene):
        return {"variant": "images",
                "payload": {"left": base64.b64encode(content.left).decode("ascii"),
                            "right": base64.b64encode(content.right).decode("ascii"),
                            "width": content.width, "height": content.height}}
    raise TypeError(f"unknown snapshot content {type(content)!r}")


def summary_to_dict(s: DemoSummary) -> dict:
    return {
        "id": s.id,
        "task_id": s.task_id,
        "control_rate_hz": s.actions.control_rate,
        "rig": rig_to_dict(s.snapshot.rig),
        "snapshot": snapshot_content_to_dict(s.snapshot.content),
        "waypoint_indices": s.waypoint_indices.tolist(),
        "waypoints": s.waypoints.tolist(),
        "keypoints": {v: s.keypoints[v].tolist() for v in ("left", "right")},
        "actions": s.actions.actions.tolist(),
    }


def encode_summary(s: DemoSummary) -> bytes:
    return json.dumps(summary_to_dict(s), sort_keys=True, indent=2).encode()


class _Probe:
    """Walks a decoded JSON document, raising SchemaError with field paths."""

    def __init__(self, doc, path=""):
        self.doc = doc
        self.path = path

    def fail(self, msg):
        where = self.path or "<root>"
        raise SchemaError(f"{where}: {msg}")

    def child(self, key):
        if not isinstance(self.doc, dict):
            self.fail("expected object")
        if key not in self.doc:
            self.fail(f"missing key {key!r}")
        sep = "." if self.path else ""
        return _Probe(self.doc[key], f"{self.path}{sep}{key}")

    def string(self):
        if not isinstance(self.doc, str):
            self.fail("expected string")
        return self.doc

    def number(self):
        if isinstance(self.doc, bool) or not isinstance(self.doc, (int, float)):
            self.fail("expected number")
        return float(self.doc)

    def integer(self):
        if isinstance(self.doc, bool) or not isinstance(self.doc, int):
            self.fail("expected integer")
        return self.doc

    def boolean(self):
        if not isinstance(self.doc, bool):
            self.fail("expected boolean")
        return self.doc

    def array(self):
        if not isinstance(self.doc, list):
            self.fail("expected array")
        return [_Probe(v, f"{self.path}[{i}]") for i, v in enumerate(self.doc)]

    def vector(self, n):
        items = self.array()
        if len(items) != n:
            self.fail(f"expected {n} numbers, got {len(items)}")
        return [p.number() for p in items]

    def mapping(self):
        if not isinstance(self.doc, dict):
            self.fail("expected object")
        return self.doc


def _intrinsics_from_probe(p: _Probe) -> CameraIntrinsics:
    return CameraIntrinsics(fx=p.child("fx").number(), fy=p.child("fy").number(),
                            cx=p.child("cx").number(), cy=p.child("cy").number(),
                            width=p.child("width").integer(),
                            height=p.child("height").integer())


def _camera_from_probe(p: _Probe) -> Camera:
    pose = p.child("pose")
    try:
        return Camera(intrinsics=_intrinsics_from_probe(p.child("intrinsics")),
                      position=pose.child("position").vector(3),
                      rotation=pose.child("rotation").vector(4))
    except ValueError as e:
        p.fail(str(e))


def rig_from_probe(p: _Probe) -> StereoRig:
    try:
        return StereoRig(left=_camera_from_probe(p.child("left")),
                         right=_camera_from_probe(p.child("right")))
    except ValueError as e:
        p.fail(str(e))


def snapshot_content_from_probe(p: _Probe):
    variant = p.child("variant").string()
    payload = p.child("payload")
    if variant == "semantic":
        objects = {}
        for name in payload.child("objects").mapping():
            op = payload.child("objects").child(name)
            objects[name] = ObjectState(position=tuple(op.child("position").vector(3)),
                                        upright=op.child("upright").boolean())
        anchors = {name: tuple(payload.child("anchors").child(name).vector(3))
                   for name in payload.child("anchors").mapping()}
        return SemanticScene(objects=objects, anchors=anchors,
                             state_id=payload.child("state_id").string())
    if variant == "images":
        try:
            left = base64.b64decode(payload.child("left").string(), validate=True)
            right = base64.b64decode(payload.child("right").string(), validate=True)
        except Exception:
            payload.fail("invalid base64 image payload")
        return ImageScene(left=left, right=right,
                          width=payload.child("width").integer(),
                          height=payload.child("height").integer())
    p.child("variant").fail(f"unknown variant {variant!r}")


def parse_action_rows(p: _Probe) -> np.ndarray:
    rows = p.array()
    if len(rows) < 2:
        p.fail("expected at least 2 actions")
    return np.array([r.vector(ACTION_DIM) for r in rows])


def decode_summary(data: bytes) -> DemoSummary:
    """Inverse of encode_summary; raises SchemaError naming the bad field."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaError(f"<root>: invalid JSON ({e.msg})") from e
    root = _Probe(doc)
    rig = rig_from_probe(root.child("rig"))
    content = snapshot_content_from_probe(root.child("snapshot"))
    actions_probe = root.child("actions")
    try:
        traj = Trajectory(parse_action_rows(actions_probe),
                          control_rate=root.child("control_rate_hz").number())
    except ValueError as e:
        actions_probe.fail(str(e))
    indices = [p.integer() for p in root.child("waypoint_indices").array()]
    waypoints = [p.vector(3) for p in root.child("waypoints").array()]
    keypoints = {v: np.array([p.vector(2)
                              for p in root.child("keypoints").child(v).array()])
                 for v in ("left", "right")}
    try:
        return DemoSummary(id=root.child("id").string(),
                           task_id=root.child("task_id").string(),
                           snapshot=SceneSnapshot(rig=rig, content=content),
                           waypoint_indices=np.array(indices, dtype=int),
                           waypoints=np.array(waypoints),
                           keypoints=keypoints, actions=traj)
    except ValueError as e:
        root.fail(str(e))


# ---------------------------------------------------------------------------
# demo library on disk: one JSON file per demo plus an index

INDEX_FILE = "index.json"


def save_demo_library(directory, summaries, sidecars=None):
    """Write demo files and the index; optional per-demo sidecar documents."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in summaries:
        fname = f"{s.id}.json"
        (directory / fname).write_bytes(encode_summary(s))
        entry = {"id": s.id, "task_id": s.task_id, "file": fname}
        if sidecars and s.id in sidecars:
            side = f"{s.id}.sidecar.json"
            (directory / side).write_text(
                json.dumps(sidecars[s.id], sort_keys=True, indent=2))
            entry["sidecar"] = side
        entries.append(entry)
    index = {"tasks": sorted({s.task_id for s in summaries}),
             "demos": sorted(entries, key=lambda e: e["id"])}
    (directory / INDEX_FILE).write_text(json.dumps(index, sort_keys=True, indent=2))


def load_demo_index(directory) -> dict:
    path = Path(directory) / INDEX_FILE
    if not path.exists():
        raise FileNotFoundError(f"no demo index at {path}")
    return json.loads(path.read_text())


def load_demo_summaries(directory):
    """Load every demo in a library directory, sorted by id."""
    directory = Path(directory)
    index = load_demo_index(directory)
    out = []
    for entry in index["demos"]:
        out.append(decode_summary((directory / entry["file"]).read_bytes()))
    return out
