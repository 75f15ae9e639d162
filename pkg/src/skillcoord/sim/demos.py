"""Synthetic kinesthetic demonstrations for the bin-sorting skills.

Each skill has a handful of characteristic teaching placements per branch;
demos are smooth eased waypoint paths with the gripper profile of the skill.
Placements straddle the branch decision boundaries the way a careful teacher
would, which is what lets the selectors recover the rules from two demos per
branch.
"""

from __future__ import annotations

import zlib

import numpy as np

from ..geometry import Pose, WorldState
from ..hsmm import Demonstration
from .scenario import PRESS_SIGNS_BY_CORNER, ScenarioSpec, flipped_pose

DT = 0.05

# teaching placements (bin frame) per pick branch: wall branches shown close
# to their wall, center demos near the rule boundary so the learned boundary
# straddles it. The first two placements per branch pin the selector rule;
# the third breaks collinearity, otherwise the bin frame turns over-confident
# perpendicular to the demo line and fights the item frame at the grasp.
PICK_SPOTS = {
    "left": [(-0.19, -0.03), (-0.15, 0.045), (-0.16, -0.055), (-0.185, 0.06)],
    "right": [(0.19, -0.03), (0.15, 0.045), (0.16, -0.055), (0.185, 0.06)],
    "front": [(-0.125, -0.135), (0.125, -0.105), (0.0, -0.095), (0.1, -0.14)],
    "back": [(-0.125, 0.135), (0.125, 0.105), (0.0, 0.095), (0.1, 0.14)],
    "center": [(-0.05, -0.075), (0.05, 0.075), (0.09, -0.07), (-0.09, 0.06)],
}

# approach direction of the end effector at grasp time, per branch
PICK_APPROACH = {
    "left": np.array([-1.0, 0.0]),
    "right": np.array([1.0, 0.0]),
    "front": np.array([0.0, -1.0]),
    "back": np.array([0.0, 1.0]),
    "center": np.array([0.0, -1.0]),
}

FLIP_SPOTS = [(0.0, 0.0), (-0.1, 0.05), (0.08, -0.06)]
SCAN_SPOTS = [(-0.08, 0.0), (0.1, 0.05), (0.0, -0.08)]
HANDOFF_JITTER = [(0.0, 0.0), (0.03, -0.02), (-0.025, 0.025)]
PRESS_DEPTHS = [0.02, 0.045]

# headings varied across demos so that frames which should not dictate a
# heading pick up honest variance instead of floor-level confidence
ITEM_YAWS = [0.0, 0.22, -0.18]
START_YAWS = [0.0, 0.25, -0.2]


def _smoothstep(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)
    return t * t * (3.0 - 2.0 * t)


def eased_path(waypoints: list[np.ndarray], steps: list[int]) -> np.ndarray:
    """Concatenate eased linear segments through the waypoints (xy)."""
    parts = []
    for a, b, n in zip(waypoints[:-1], waypoints[1:], steps):
        s = _smoothstep(n)[:, None]
        seg = np.asarray(a) + s * (np.asarray(b) - np.asarray(a))
        parts.append(seg if not parts else seg[1:])
    return np.vstack(parts)


def approach_curve(
    start: np.ndarray, target: np.ndarray, direction: np.ndarray, n: int, swing: float = 0.15
) -> np.ndarray:
    """Cubic arc ending at the target exactly along ``direction``.

    The first control point swings the path sideways around the target, so
    the incoming transit and the final approach never overlap spatially
    (overlapping phases would be merged by the mixture fit).
    """
    direction = np.asarray(direction, dtype=float)
    perp = np.array([-direction[1], direction[0]])
    mid = start - target
    if float(perp @ mid) < 0.0:
        perp = -perp  # swing toward the side the start lies on
    c1 = target - 0.22 * direction + swing * perp
    c2 = target - 0.1 * direction
    t = _smoothstep(n)[:, None]
    u = 1.0 - t
    return (
        u**3 * np.asarray(start)
        + 3.0 * u**2 * t * c1
        + 3.0 * u * t**2 * c2
        + t**3 * np.asarray(target)
    )


def _states(
    spec: ScenarioSpec,
    ee_xy: np.ndarray,
    item_xy: np.ndarray,
    grip: np.ndarray,
    item_quat: np.ndarray,
    ee_yaw: float = 0.0,
) -> list[WorldState]:
    states = []
    for t in range(len(ee_xy)):
        item = Pose(np.array([item_xy[t, 0], item_xy[t, 1], 0.0]), item_quat)
        robot = Pose.planar(ee_xy[t, 0], ee_xy[t, 1], ee_yaw)
        states.append(spec.base_state(item, robot=robot, gripper_closed=bool(grip[t] > 0.5)))
    return states


def _pick_demo(spec: ScenarioSpec, branch: str, item_xy, item_yaw, rng) -> Demonstration:
    item = np.asarray(item_xy, dtype=float)
    home = spec.home.position[:2]
    path = approach_curve(home, item, PICK_APPROACH[branch], 32)
    path = np.vstack([path, np.tile(item, (7, 1))])
    grip = np.zeros(len(path))
    grip[-5:] = 1.0
    item_path = np.tile(item, (len(path), 1))
    quat = Pose.planar(0, 0, item_yaw).orientation
    return Demonstration(
        tuple(_states(spec, path, item_path, grip, quat)), branch, "pick_bin", DT
    )


def _press_demo(
    spec: ScenarioSpec, branch: str, depth: float, item_yaw: float, rng
) -> Demonstration:
    hw, hh = spec.bin_geom.half
    sx, sy = PRESS_SIGNS_BY_CORNER[branch]
    corner_item = np.array([sx * (hw - depth), sy * (hh - depth)])
    corner_item = corner_item + rng.normal(scale=0.004, size=2)
    push_dir = np.array([-sx, -sy]) / np.sqrt(2.0)
    end = corner_item + push_dir * 0.11
    home = spec.home.position[:2]
    # contact the item already moving along the push direction, then shift
    path = approach_curve(home, corner_item, push_dir, 26)
    push = eased_path([corner_item, end], [14])[1:]
    path = np.vstack([path, push, np.tile(end, (4, 1))])
    item_path = np.vstack([
        np.tile(corner_item, (len(path) - len(push) - 4, 1)),
        push,
        np.tile(end, (4, 1)),
    ])
    grip = np.zeros(len(path))
    quat = Pose.planar(0, 0, item_yaw).orientation
    return Demonstration(
        tuple(_states(spec, path, item_path, grip, quat)), branch, "press_shift", DT
    )


def _flip_demo(spec: ScenarioSpec, spot, start_yaw, rng) -> Demonstration:
    center = np.asarray(spot, dtype=float) + rng.normal(scale=0.005, size=2)
    loop = [
        center,
        center + (0.03, 0.0),
        center + (0.03, 0.03),
        center + (0.0, 0.03),
        center,
    ]
    path = eased_path([np.asarray(p) for p in loop], [5, 5, 5, 5])
    grip = np.ones(len(path))
    down = flipped_pose(Pose.planar(center[0], center[1], 0.0))
    states = _states(spec, path, path.copy(), grip, down.orientation, ee_yaw=start_yaw)
    # the face flips over in the final settling moment
    up = Pose.planar(0, 0, 0.0).orientation
    last = states[-1]
    item = last.object(spec.item)
    states[-1] = last.with_object(spec.item, Pose(item.position, up))
    return Demonstration(tuple(states), "main", "flip", DT)


def _transport_demo(
    spec: ScenarioSpec, skill: str, start_xy, target_xy, release: bool, start_yaw, rng
) -> Demonstration:
    start = np.asarray(start_xy, dtype=float)
    target = np.asarray(target_xy, dtype=float)
    lift = start + (target - start) * 0.25 + np.array([0.0, 0.05])
    path = eased_path([start, lift, target], [16, 24])
    path = np.vstack([path, np.tile(target, (7, 1))])
    grip = np.ones(len(path))
    if release:
        grip[-3:] = 0.0
    quat = Pose.planar(0, 0, 0.0).orientation
    return Demonstration(
        tuple(_states(spec, path, path.copy(), grip, quat, ee_yaw=start_yaw)),
        "main",
        skill,
        DT,
    )


def synth_demos(
    spec: ScenarioSpec, skill: str, branch: str, n: int, seed: int = 0
) -> list[Demonstration]:
    """Deterministic demonstrations for one branch of one bin-sorting skill."""
    rng = np.random.default_rng(
        (seed, zlib.crc32(skill.encode()), zlib.crc32(branch.encode()))
    )
    demos = []
    if skill == "pick_bin":
        spots = PICK_SPOTS[branch]
        for i in range(n):
            item = np.asarray(spots[i % len(spots)]) + rng.normal(scale=0.003, size=2)
            demos.append(_pick_demo(spec, branch, item, ITEM_YAWS[i % len(ITEM_YAWS)], rng))
    elif skill == "press_shift":
        for i in range(n):
            demos.append(
                _press_demo(
                    spec,
                    branch,
                    PRESS_DEPTHS[i % len(PRESS_DEPTHS)],
                    ITEM_YAWS[i % len(ITEM_YAWS)],
                    rng,
                )
            )
    elif skill == "flip":
        for i in range(n):
            demos.append(
                _flip_demo(
                    spec, FLIP_SPOTS[i % len(FLIP_SPOTS)], START_YAWS[i % len(START_YAWS)], rng
                )
            )
    elif skill == "scan":
        scanner = spec.fixtures["scanner"].position[:2]
        for i in range(n):
            start = np.asarray(SCAN_SPOTS[i % len(SCAN_SPOTS)]) + rng.normal(
                scale=0.005, size=2
            )
            demos.append(
                _transport_demo(
                    spec, "scan", start, scanner, False, START_YAWS[i % len(START_YAWS)], rng
                )
            )
    elif skill in ("drop_bin", "sort"):
        zone = spec.fixtures["drop_zone" if skill == "drop_bin" else "sort_zone"]
        scanner = spec.fixtures["scanner"].position[:2]
        for i in range(n):
            start = scanner + np.asarray(HANDOFF_JITTER[i % len(HANDOFF_JITTER)])
            demos.append(
                _transport_demo(
                    spec,
                    skill,
                    start,
                    zone.position[:2],
                    True,
                    START_YAWS[i % len(START_YAWS)],
                    rng,
                )
            )
    else:
        raise KeyError(f"no demo recipe for skill {skill!r}")
    return demos


def all_demos(spec: ScenarioSpec, seed: int = 0) -> dict[str, list[Demonstration]]:
    """Every skill's demo set, branch counts taken from the scenario roster."""
    out: dict[str, list[Demonstration]] = {}
    for name, sd in spec.skills.items():
        demos: list[Demonstration] = []
        for branch in sd.branches:
            demos.extend(synth_demos(spec, name, branch, sd.demos_per_branch, seed))
        out[name] = demos
    return out
