"""Kinematic world model: symbolic-geometric skill effects on a scene.

No physics: effects move poses. Failures are geometric precondition checks,
the important one being the pick approach rule: an item close to a bin wall
must be approached from the bin interior toward that wall, otherwise the
gripper would collide. Wrong branch choices near walls fail exactly there.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..geometry import Frame, Pose, WorldState
from ..lqr import Trajectory
from .scenario import (
    ScenarioSpec,
    WALL_NORMALS,
    barcode_up,
    bin_local_xy,
    corner_of,
    flipped_pose,
    near_walls,
    wall_distances,
)

HELD_TOL = 1e-3
APPROACH_BACKTRACK = 0.03  # displacement defining the final approach direction
APPROACH_ALIGNMENT = -0.5  # max allowed cos(angle) between approach and inward normal


@dataclass(frozen=True)
class Scene:
    """A concrete workspace: scenario spec, current world state, provenance."""

    spec: ScenarioSpec
    state: WorldState
    seed: int | None = None

    def with_state(self, state: WorldState) -> "Scene":
        return replace(self, state=state)


def item_held(state: WorldState, spec: ScenarioSpec) -> bool:
    if not state.gripper_closed:
        return False
    item = state.object(spec.item)
    return bool(np.linalg.norm(item.position - state.robot.position) < HELD_TOL)


def _approach_direction(trajectory: Trajectory) -> np.ndarray | None:
    """Unit xy direction of the final approach, or None for a stationary tail."""
    positions = trajectory.positions[:, :2]
    end = positions[-1]
    for t in range(len(positions) - 2, -1, -1):
        delta = end - positions[t]
        if np.linalg.norm(delta) >= APPROACH_BACKTRACK:
            return delta / np.linalg.norm(delta)
    return None


def _end_pose(trajectory: Trajectory) -> Pose:
    return trajectory.pose_at(len(trajectory) - 1)


class SimWorld:
    """World-model adapter used by the execution engine."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec

    def step(
        self, state: WorldState, skill: str, branch: str, trajectory: Trajectory
    ) -> tuple[WorldState, str | None]:
        handler = getattr(self, f"_apply_{skill}", None)
        if handler is None:
            return state, f"no effect model for skill {skill!r}"
        return handler(state, branch, trajectory)

    # -- effects -----------------------------------------------------------

    def _apply_pick_bin(self, state, branch, trajectory):
        spec = self.spec
        if state.gripper_closed:
            return state, "gripper already closed"
        item = state.object(spec.item)
        xy = bin_local_xy(state, spec)
        if corner_of(xy, spec.bin_geom) is not None:
            return state, "item sits in a corner and must be cleared first"
        end = _end_pose(trajectory)
        if np.linalg.norm(end.position[:2] - item.position[:2]) > spec.grasp_tol:
            return state, "grasp missed the item"
        walls = near_walls(xy, spec.bin_geom)
        if walls:
            direction = _approach_direction(trajectory)
            if direction is None:
                return state, "no approach motion near a wall"
            bin_rot = Frame.from_pose(state.object("bin"), planar=True).rotation
            local_dir = bin_rot[:2, :2].T @ direction
            dists = wall_distances(xy, spec.bin_geom)
            nearest = min(walls, key=lambda w: dists[w])
            if float(local_dir @ WALL_NORMALS[nearest]) > APPROACH_ALIGNMENT:
                return state, f"approach blocked by the {nearest} wall"
        robot = Pose(
            np.array([end.position[0], end.position[1], item.position[2]]),
            end.orientation,
        )
        new_item = Pose(robot.position.copy(), item.orientation)
        new_state = state.with_robot(robot, gripper_closed=True).with_object(
            spec.item, new_item
        )
        return new_state, None

    def _apply_press_shift(self, state, branch, trajectory):
        spec = self.spec
        if state.gripper_closed:
            return state, "gripper already closed"
        xy = bin_local_xy(state, spec)
        if corner_of(xy, spec.bin_geom) is None:
            return state, "no cornered item to clear"
        end = _end_pose(trajectory)
        bin_frame = Frame.from_pose(state.object("bin"), planar=True)
        end_local = (bin_frame.rotation.T @ (end.position - bin_frame.origin))[:2]
        hw, hh = spec.bin_geom.half
        if abs(end_local[0]) > hw - 0.01 or abs(end_local[1]) > hh - 0.01:
            return state, "push ended outside the bin"
        if corner_of(end_local, spec.bin_geom) is not None:
            return state, "item is still cornered after the push"
        item = state.object(spec.item)
        new_item = Pose(
            np.array([end.position[0], end.position[1], item.position[2]]),
            item.orientation,
        )
        robot = Pose(new_item.position.copy(), end.orientation)
        return (
            state.with_robot(robot, gripper_closed=False).with_object(spec.item, new_item),
            None,
        )

    def _apply_flip(self, state, branch, trajectory):
        spec = self.spec
        if not item_held(state, spec):
            return state, "nothing in the gripper to flip"
        end = _end_pose(trajectory)
        item = state.object(spec.item)
        moved = Pose(
            np.array([end.position[0], end.position[1], item.position[2]]),
            flipped_pose(item).orientation,
        )
        robot = Pose(moved.position.copy(), end.orientation)
        return (
            state.with_robot(robot, gripper_closed=True).with_object(spec.item, moved),
            None,
        )

    def _apply_scan(self, state, branch, trajectory):
        spec = self.spec
        if not item_held(state, spec):
            return state, "nothing in the gripper to scan"
        if not barcode_up(state.object(spec.item)):
            return state, "barcode is facing away from the scanner"
        end = _end_pose(trajectory)
        scanner = state.object("scanner")
        if np.linalg.norm(end.position[:2] - scanner.position[:2]) > spec.scan_radius:
            return state, "missed the scanner"
        item = state.object(spec.item)
        moved = Pose(
            np.array([end.position[0], end.position[1], item.position[2]]),
            item.orientation,
        )
        robot = Pose(moved.position.copy(), end.orientation)
        return (
            state.with_robot(robot, gripper_closed=True).with_object(spec.item, moved),
            None,
        )

    def _apply_drop_bin(self, state, branch, trajectory):
        return self._release_at(state, trajectory, "drop_zone")

    def _apply_sort(self, state, branch, trajectory):
        return self._release_at(state, trajectory, "sort_zone")

    def _release_at(self, state, trajectory, zone_id):
        spec = self.spec
        if not item_held(state, spec):
            return state, "nothing in the gripper to place"
        end = _end_pose(trajectory)
        zone = state.object(zone_id)
        if np.linalg.norm(end.position[:2] - zone.position[:2]) > spec.zone_radius:
            return state, f"missed the {zone_id}"
        item = state.object(spec.item)
        placed = Pose(
            np.array([end.position[0], end.position[1], item.position[2]]),
            item.orientation,
        )
        robot = Pose(placed.position.copy(), end.orientation)
        return (
            state.with_robot(robot, gripper_closed=False).with_object(spec.item, placed),
            None,
        )


def apply_skill_effect(
    scene: Scene, skill: str, branch: str, trajectory: Trajectory
) -> tuple[Scene, str | None]:
    """Scene-level wrapper around the world model."""
    world = SimWorld(scene.spec)
    state, failure = world.step(scene.state, skill, branch, trajectory)
    return scene.with_state(state), failure
