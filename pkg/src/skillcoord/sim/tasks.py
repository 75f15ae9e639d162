"""Scene and task-instance sampling plus the skill training entry point.

Sampling is fully seeded: the same seed always yields the same scene, goal,
and therefore the same execution trace. Item placements keep a small dead
band around the branch-rule boundaries so teaching labels stay unambiguous;
the band is a declared scenario constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..execution import TaskInstance
from ..geometry import Pose, WorldState, compose, quat_from_yaw
from ..hsmm import Demonstration, SkillModel, fit_skill_model
from .demos import all_demos
from .scenario import (
    CORNERS,
    PRESS_SIGNS_BY_CORNER,
    ScenarioSpec,
    corner_of,
    flipped_pose,
    wall_distances,
)
from .world import Scene


def _rng(seed, *salt) -> np.random.Generator:
    return np.random.default_rng((seed,) + tuple(salt))


def _sample_item_local(spec: ScenarioSpec, rng, corner: bool) -> np.ndarray:
    geom = spec.bin_geom
    hw, hh = geom.half
    if corner:
        sx, sy = PRESS_SIGNS_BY_CORNER[spec.feeder_corner]
        margin = geom.corner_threshold - spec.boundary_margin
        return np.array([
            sx * (hw - rng.uniform(0.012, margin)),
            sy * (hh - rng.uniform(0.012, margin)),
        ])
    corner_band = geom.corner_threshold + spec.boundary_margin
    while True:
        xy = np.array([
            rng.uniform(-hw + 0.012, hw - 0.012),
            rng.uniform(-hh + 0.012, hh - 0.012),
        ])
        dists = wall_distances(xy, geom)
        if any(
            abs(d - geom.wall_threshold) <= spec.boundary_margin for d in dists.values()
        ):
            continue
        # keep clear of every corner region, including its dead band
        if min(dists["left"], dists["right"]) < corner_band and min(
            dists["front"], dists["back"]
        ) < corner_band:
            continue
        return xy


def sample_scene(
    spec: ScenarioSpec,
    seed: int,
    corner: bool | None = None,
    flipped: bool | None = None,
) -> Scene:
    """Deterministic scene: placed fixtures plus one item in the bin."""
    rng = _rng(seed, 101)
    shift = rng.uniform(-spec.scene_shift, spec.scene_shift, size=2)
    origin = Pose.planar(shift[0], shift[1], 0.0)
    if corner is None:
        corner = bool(rng.uniform() < spec.corner_prob)
    if flipped is None:
        flipped = bool(rng.uniform() < spec.flip_prob)
    local = _sample_item_local(spec, rng, corner)
    yaw = float(rng.uniform(-spec.item_yaw_range, spec.item_yaw_range))
    item = compose(origin, Pose.planar(local[0], local[1], yaw))
    if flipped:
        item = flipped_pose(item)
    state = spec.base_state(item, origin=origin)
    return Scene(spec=spec, state=state, seed=seed)


def sample_instance(
    spec: ScenarioSpec,
    seed: int,
    corner: bool | None = None,
    flipped: bool | None = None,
) -> tuple[Scene, TaskInstance]:
    """Scene plus a goal: the item placed at the drop or sort zone, face up."""
    scene = sample_scene(spec, seed, corner=corner, flipped=flipped)
    rng = _rng(seed, 202)
    zone_id = "drop_zone" if rng.uniform() < 0.5 else "sort_zone"
    zone = scene.state.object(zone_id)
    item = scene.state.object(spec.item)
    goal_item = Pose(
        np.array([zone.position[0], zone.position[1], item.position[2]]),
        quat_from_yaw(item.yaw),
    )
    goal_state = WorldState(
        scene.state.robot,
        False,
        {**{k: v for k, v in scene.state.objects.items()}, spec.item: goal_item},
    )
    return scene, TaskInstance(scene.state, goal_state)


@dataclass
class SkillLibrary:
    skills: dict[str, SkillModel]
    demos: dict[str, list[Demonstration]]


def train_skills(
    spec: ScenarioSpec, seed: int = 0, lam: float | None = None
) -> SkillLibrary:
    """Fit every skill of the roster from its synthetic demonstrations."""
    demos = all_demos(spec, seed)
    lam = spec.selector_lam if lam is None else lam
    skills = {}
    for name, sd in spec.skills.items():
        skills[name] = fit_skill_model(
            demos[name],
            sd.n_components,
            sd.frames,
            sd.objects,
            skill=name,
            lam=lam,
        )
    return SkillLibrary(skills=skills, demos=demos)
