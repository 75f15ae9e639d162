"""Rigid-body geometry: poses, frames, and relative-transform features.

Conventions used throughout the package:

* quaternions are scalar-first ``(w, x, y, z)``, unit norm, and stored with
  ``w >= 0`` so every rotation has exactly one representative;
* composition is rotate-then-translate: ``(a * b).position = a.position +
  R_a @ b.position``;
* a relative transform between two frames is a 7-vector: 3 translation
  entries expressed in the source frame followed by the 4 quaternion
  entries of the relative rotation.

All operations are pure functions of their inputs and return fresh arrays,
so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ORTHO_TOL = 1e-9
UNIT_TOL = 1e-9

RESERVED_IDS = ("global", "robot")


class EntityMismatchError(ValueError):
    """Two world states do not describe the same set of entities."""


# ---------------------------------------------------------------------------
# quaternion helpers
# ---------------------------------------------------------------------------

def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Pick the double-cover representative with w >= 0.

    For w == 0 the sign of the first nonzero vector entry decides, so the
    result is deterministic for every input.
    """
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        return -q
    if q[0] == 0.0:
        for v in q[1:]:
            if v != 0.0:
                return q if v > 0.0 else -q
    return q.copy()


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return quat_canonical(q / n)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to canonical quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([
            0.25 * s,
            (m[2, 1] - m[1, 2]) / s,
            (m[0, 2] - m[2, 0]) / s,
            (m[1, 0] - m[0, 1]) / s,
        ])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([
            (m[2, 1] - m[1, 2]) / s,
            0.25 * s,
            (m[0, 1] + m[1, 0]) / s,
            (m[0, 2] + m[2, 0]) / s,
        ])
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([
            (m[0, 2] - m[2, 0]) / s,
            (m[0, 1] + m[1, 0]) / s,
            0.25 * s,
            (m[1, 2] + m[2, 1]) / s,
        ])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([
            (m[1, 0] - m[0, 1]) / s,
            (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s,
            0.25 * s,
        ])
    return quat_normalize(q)


def quat_from_yaw(yaw: float) -> np.ndarray:
    return quat_canonical(np.array([np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)]))


def yaw_of_matrix(rotation: np.ndarray) -> float:
    """Planar heading of a rotation: angle of the rotated x axis in the xy plane."""
    return float(np.arctan2(rotation[1, 0], rotation[0, 0]))


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle between two orientations, in [0, pi]."""
    dot = abs(float(np.dot(a, b)))
    return 2.0 * float(np.arccos(min(dot, 1.0)))


def wrap_angle(a: float) -> float:
    """Wrap into (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    if w == -np.pi:
        w = np.pi
    return float(w)


# ---------------------------------------------------------------------------
# poses and frames
# ---------------------------------------------------------------------------

def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pose:
    """Position plus unit quaternion orientation (w >= 0)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = _readonly(np.asarray(self.position, dtype=float).reshape(3))
        quat = np.asarray(self.orientation, dtype=float).reshape(4)
        norm = np.linalg.norm(quat)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {norm:.3e} is not 1")
        quat = _readonly(quat_normalize(quat))
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def planar(x: float, y: float, yaw: float, z: float = 0.0) -> "Pose":
        return Pose(np.array([x, y, z]), quat_from_yaw(yaw))

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    @property
    def yaw(self) -> float:
        return yaw_of_matrix(self.rotation())

    def inverse(self) -> "Pose":
        qinv = quat_canonical(quat_conjugate(self.orientation))
        return Pose(-(quat_to_matrix(qinv) @ self.position), qinv)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.position, other.position, atol=atol)
            and np.allclose(self.orientation, other.orientation, atol=atol)
        )


def compose(a: Pose, b: Pose) -> Pose:
    """Group composition a * b (apply b first, then a)."""
    return Pose(
        a.position + a.rotation() @ b.position,
        quat_multiply(a.orientation, b.orientation),
    )


@dataclass(frozen=True)
class Frame:
    """A coordinate system: origin and orthonormal rotation."""

    origin: np.ndarray
    rotation: np.ndarray
    label: str = ""

    def __post_init__(self):
        origin = _readonly(np.asarray(self.origin, dtype=float).reshape(3))
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6):
            raise ValueError("frame rotation is not orthonormal")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("frame rotation is not right-handed")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "rotation", _readonly(rot))

    @staticmethod
    def identity(label: str = "global") -> "Frame":
        return Frame(np.zeros(3), np.eye(3), label)

    @staticmethod
    def from_pose(pose: Pose, planar: bool = False, label: str = "") -> "Frame":
        """Attach a frame to a pose; planar keeps only the yaw component."""
        if planar:
            return Frame(pose.position, quat_to_matrix(quat_from_yaw(pose.yaw)), label)
        return Frame(pose.position, pose.rotation(), label)

    @property
    def yaw(self) -> float:
        return yaw_of_matrix(self.rotation)

    def as_pose(self) -> Pose:
        return Pose(self.origin, matrix_to_quat(self.rotation))


# ---------------------------------------------------------------------------
# world state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorldState:
    """Robot end-effector pose, gripper flag, and object poses.

    Object order is fixed at construction and defines all feature layouts,
    so states of one task must share the same insertion order.
    """

    robot: Pose
    gripper_closed: bool
    objects: Mapping[str, Pose]

    def __post_init__(self):
        objs = dict(self.objects)
        for oid in objs:
            if oid in RESERVED_IDS:
                raise ValueError(f"object id {oid!r} is reserved")
        object.__setattr__(self, "objects", objs)

    @property
    def object_ids(self) -> tuple[str, ...]:
        return tuple(self.objects)

    def object(self, oid: str) -> Pose:
        return self.objects[oid]

    def with_robot(self, robot: Pose, gripper_closed: bool | None = None) -> "WorldState":
        grip = self.gripper_closed if gripper_closed is None else gripper_closed
        return WorldState(robot, grip, self.objects)

    def with_object(self, oid: str, pose: Pose) -> "WorldState":
        if oid not in self.objects:
            raise KeyError(oid)
        objs = dict(self.objects)
        objs[oid] = pose
        return WorldState(self.robot, self.gripper_closed, objs)

    def same_entities(self, other: "WorldState") -> bool:
        return self.object_ids == other.object_ids


# ---------------------------------------------------------------------------
# frame specs and feature vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameSpec:
    """Ordered frame references of a skill: 'global', 'robot', or object ids.

    The order is declared once per skill and must never change afterwards,
    because the feature layout depends on it. ``planar`` flattens each frame
    to its yaw component, which keeps frame rotations within the workspace
    plane. Entities listed in ``translation_only`` contribute position-only
    frames (identity rotation), the right model for rotation-symmetric
    objects whose heading should not steer the skill. Full object
    orientations still enter edge features untouched.
    """

    refs: tuple[str, ...]
    planar: bool = True
    translation_only: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.refs) < 2:
            raise ValueError("a frame spec needs at least two frames")
        object.__setattr__(self, "refs", tuple(self.refs))
        object.__setattr__(self, "translation_only", tuple(self.translation_only))

    @property
    def transform_count(self) -> int:
        return len(self.refs) - 1


@dataclass(frozen=True)
class EdgeFeatureSpec:
    """Entities and goal-state frames used by one task-network node."""

    objects: tuple[str, ...]
    frames: FrameSpec

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def length(self) -> int:
        return 7 * (1 + len(self.objects)) + 7 * self.frames.transform_count


def frames_from_state(state: WorldState, spec: FrameSpec) -> list[Frame]:
    frames = []
    for ref in spec.refs:
        if ref == "global":
            frames.append(Frame.identity())
            continue
        pose = state.robot if ref == "robot" else state.object(ref)
        if ref in spec.translation_only:
            frames.append(Frame(pose.position, np.eye(3), ref))
        else:
            frames.append(Frame.from_pose(pose, planar=spec.planar, label=ref))
    return frames


def relative_transform(f_i: Frame, f_j: Frame) -> np.ndarray:
    """Express frame j in frame i coordinates as a 7-vector (b_ij, alpha_ij)."""
    b = f_i.rotation.T @ (f_j.origin - f_i.origin)
    alpha = quat_canonical(matrix_to_quat(f_i.rotation.T @ f_j.rotation))
    return np.concatenate([b, alpha])


def skill_feature(frames: Sequence[Frame]) -> np.ndarray:
    """Concatenate the relative transforms of consecutive frames (7 per pair)."""
    if len(frames) < 2:
        raise ValueError("skill features need at least two frames")
    return np.concatenate(
        [relative_transform(frames[p - 1], frames[p]) for p in range(1, len(frames))]
    )


def pose_delta(current: Pose, goal: Pose) -> np.ndarray:
    """Current-to-goal delta of one entity: translation plus relative quaternion.

    The translation is the plain position difference (world axes), so moving
    an entity along one axis moves exactly one feature entry regardless of
    its heading; the rotation part is the full relative quaternion, which is
    what exposes face-down states to the selectors.
    """
    b = goal.position - current.position
    alpha = quat_canonical(
        matrix_to_quat(current.rotation().T @ goal.rotation())
    )
    return np.concatenate([b, alpha])


def edge_feature(current: WorldState, goal: WorldState, spec: EdgeFeatureSpec) -> np.ndarray:
    """Feature vector for edge selection: per-entity deltas plus goal features.

    Blocks are the robot's current-to-goal transform, then one block per
    object in the spec's fixed order, then the skill feature of the goal
    state under the node's frame spec.
    """
    if not current.same_entities(goal):
        raise EntityMismatchError(
            f"states describe different entities: {current.object_ids} vs {goal.object_ids}"
        )
    blocks = [pose_delta(current.robot, goal.robot)]
    for oid in spec.objects:
        blocks.append(pose_delta(current.object(oid), goal.object(oid)))
    blocks.append(skill_feature(frames_from_state(goal, spec.frames)))
    return np.concatenate(blocks)


# ---------------------------------------------------------------------------
# projections and rigid transforms
# ---------------------------------------------------------------------------

def project_pose(frame: Frame, pose: Pose) -> Pose:
    return Pose(
        frame.rotation.T @ (pose.position - frame.origin),
        matrix_to_quat(frame.rotation.T @ pose.rotation()),
    )


def project_point(frame: Frame, point: np.ndarray) -> np.ndarray:
    return frame.rotation.T @ (np.asarray(point, dtype=float) - frame.origin)


def project_to_frame(frame: Frame, value):
    """Project a Pose, WorldState, or 3-point into frame-local coordinates."""
    if isinstance(value, Pose):
        return project_pose(frame, value)
    if isinstance(value, WorldState):
        return WorldState(
            project_pose(frame, value.robot),
            value.gripper_closed,
            {oid: project_pose(frame, p) for oid, p in value.objects.items()},
        )
    return project_point(frame, value)


def unproject_pose(frame: Frame, local: Pose) -> Pose:
    return Pose(
        frame.origin + frame.rotation @ local.position,
        matrix_to_quat(frame.rotation @ local.rotation()),
    )


def transform_pose(g: Pose, pose: Pose) -> Pose:
    return compose(g, pose)


def transform_frame(g: Pose, frame: Frame) -> Frame:
    return Frame(
        g.position + g.rotation() @ frame.origin,
        g.rotation() @ frame.rotation,
        frame.label,
    )


def transform_state(g: Pose, state: WorldState) -> WorldState:
    return WorldState(
        compose(g, state.robot),
        state.gripper_closed,
        {oid: compose(g, p) for oid, p in state.objects.items()},
    )
