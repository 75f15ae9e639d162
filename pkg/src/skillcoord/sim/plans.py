"""Synthetic complete plans for the assembly analog.

Three solved instances cover the whole ground-truth graph: a standing cap
attached to the peg, a lying cap re-oriented and dropped to the pallet, and
a standing cap at the platform center that needs a translate between two
picks. States are synthetic but geometrically consistent, so the ingested
archives also train meaningful edge selectors.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Pose, WorldState
from ..network import Plan
from .scenario import ScenarioSpec, flipped_pose


def _cap_pose(xy, lying=False) -> Pose:
    pose = Pose.planar(xy[0], xy[1], 0.0)
    return flipped_pose(pose) if lying else pose


def _state(spec: ScenarioSpec, cap_xy, lying=False, held=False, robot_xy=None) -> WorldState:
    cap = _cap_pose(cap_xy, lying)
    if robot_xy is None:
        robot_xy = cap_xy if held else spec.home.position[:2]
    robot = Pose.planar(robot_xy[0], robot_xy[1], 0.0)
    return spec.base_state(cap, robot=robot, gripper_closed=held)


def make_assembly_plans(spec: ScenarioSpec, jitter_seed: int = 0) -> list[Plan]:
    rng = np.random.default_rng((jitter_seed, 77))
    peg = spec.fixtures["peg"].position[:2]
    pallet = spec.fixtures["pallet"].position[:2]
    edge = np.array([0.12, 0.0])
    center = np.array([0.0, 0.0])

    def j(xy):
        return np.asarray(xy, dtype=float) + rng.normal(scale=0.004, size=2)

    # standing cap at the platform edge, goal: attached to the peg
    e0 = j(edge)
    plan_attach = Plan(
        states=(
            _state(spec, e0),
            _state(spec, e0, robot_xy=e0 + (0.0, 0.05)),
            _state(spec, e0, held=True),
            _state(spec, j(peg)),
        ),
        skills=("inspect", "pick", "attach"),
    )

    # lying cap, goal: dropped onto the pallet
    c0 = j(center)
    up0 = j(c0 + (0.02, 0.0))
    plan_reorient = Plan(
        states=(
            _state(spec, c0, lying=True),
            _state(spec, c0, lying=True, robot_xy=c0 + (0.0, 0.05)),
            _state(spec, up0, robot_xy=up0),
            _state(spec, up0, held=True),
            _state(spec, j(pallet)),
        ),
        skills=("inspect", "re_orient", "pick", "drop"),
    )

    # standing cap at the center: translate to the edge between two picks
    c1 = j(center)
    e1 = j(edge)
    plan_translate = Plan(
        states=(
            _state(spec, c1),
            _state(spec, c1, robot_xy=c1 + (0.0, 0.05)),
            _state(spec, c1, held=True),
            _state(spec, e1, robot_xy=e1),
            _state(spec, e1, held=True),
            _state(spec, j(pallet)),
        ),
        skills=("inspect", "pick", "translate", "pick", "drop"),
    )
    return [plan_attach, plan_reorient, plan_translate]
