"""Workspace scenarios: skill rosters, fixtures, and geometry constants.

Two scenarios are built in. ``bin_sorting`` is fully executable: a rectangular
bin with an item that must be cleared from corners, picked with a wall-aware
approach, flipped barcode-up if needed, scanned, and then dropped or sorted
depending on the goal. ``assembly`` provides the skill roster, feature specs,
and the ground-truth task graph used for plan-ingestion checks.

All scene distances are meters; scenes are planar (z = 0, yaw-only headings).
Scene distributions (item placement, flip probability, yaw range) are part of
the scenario constants below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import EdgeFeatureSpec, Frame, FrameSpec, Pose, WorldState
from ..network import START, STOP, TaskNetwork

WALLS = ("left", "right", "front", "back")
CORNERS = ("left_front", "left_back", "right_front", "right_back")

# unit normals pointing into the bin interior
WALL_NORMALS = {
    "left": np.array([1.0, 0.0]),
    "right": np.array([-1.0, 0.0]),
    "front": np.array([0.0, 1.0]),
    "back": np.array([0.0, -1.0]),
}

# axis signs of each corner in the bin frame
PRESS_SIGNS_BY_CORNER = {
    "left_front": (-1.0, -1.0),
    "left_back": (-1.0, 1.0),
    "right_front": (1.0, -1.0),
    "right_back": (1.0, 1.0),
}


@dataclass(frozen=True)
class SkillDef:
    name: str
    branches: tuple[str, ...]
    objects: tuple[str, ...]
    frames: FrameSpec
    n_components: int = 4
    demos_per_branch: int = 2


@dataclass(frozen=True)
class BinGeometry:
    width: float = 0.4
    height: float = 0.3
    wall_threshold: float = 0.06
    corner_threshold: float = 0.06

    @property
    def half(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    skills: dict[str, SkillDef]
    fixtures: dict[str, Pose]
    item: str
    home: Pose
    ground_truth_edges: tuple[tuple[str, str], ...]
    bin_geom: BinGeometry = field(default_factory=BinGeometry)
    scan_radius: float = 0.05
    zone_radius: float = 0.08
    grasp_tol: float = 0.025  # suction cup radius
    # scene distribution
    scene_shift: float = 0.05  # per-scene placement offset range (uniform square)
    corner_prob: float = 0.25
    flip_prob: float = 0.35
    item_yaw_range: float = 0.3
    boundary_margin: float = 0.015  # dead band around decision-rule boundaries
    feeder_corner: str = "right_back"  # the chute drops cornered items here
    selector_lam: float = 1e-4  # regularization of branch and edge selectors

    @property
    def skill_names(self) -> tuple[str, ...]:
        return tuple(self.skills)

    def feature_specs(self) -> dict[str, EdgeFeatureSpec]:
        return {
            name: EdgeFeatureSpec(objects=sd.objects, frames=sd.frames)
            for name, sd in self.skills.items()
        }

    def network(self) -> TaskNetwork:
        return TaskNetwork(self.feature_specs(), lam=self.selector_lam)

    def object_ids(self) -> tuple[str, ...]:
        return tuple(self.fixtures) + (self.item,)

    def base_state(
        self,
        item_pose: Pose,
        robot: Pose | None = None,
        gripper_closed: bool = False,
        origin: Pose | None = None,
    ) -> WorldState:
        """Assemble a world state from the canonical fixtures plus the item."""
        from ..geometry import compose

        origin = origin or Pose.identity()
        objects = {oid: compose(origin, p) for oid, p in self.fixtures.items()}
        objects[self.item] = item_pose
        return WorldState(robot or compose(origin, self.home), gripper_closed, objects)


def bin_sorting_spec() -> ScenarioSpec:
    skills = {
        # the item is grasped by suction, so its heading must not steer the
        # motion: its frame is translation-only
        "pick_bin": SkillDef(
            "pick_bin",
            branches=("left", "right", "front", "back", "center"),
            objects=("bin", "item"),
            frames=FrameSpec(("bin", "item"), translation_only=("item",)),
            demos_per_branch=4,
        ),
        "press_shift": SkillDef(
            "press_shift",
            branches=CORNERS,
            objects=("bin", "item"),
            frames=FrameSpec(("bin", "item"), translation_only=("item",)),
        ),
        "flip": SkillDef(
            "flip",
            branches=("main",),
            objects=("item",),
            frames=FrameSpec(("robot", "item"), translation_only=("item",)),
            n_components=3,
            demos_per_branch=3,
        ),
        # transports anchor on the gripper, not the carried item: the item's
        # heading is arbitrary and would rotate the frame prediction
        "scan": SkillDef(
            "scan",
            branches=("main",),
            objects=("scanner", "item"),
            frames=FrameSpec(("robot", "scanner")),
            demos_per_branch=3,
        ),
        "drop_bin": SkillDef(
            "drop_bin",
            branches=("main",),
            objects=("drop_zone", "item"),
            frames=FrameSpec(("robot", "drop_zone")),
            demos_per_branch=3,
        ),
        "sort": SkillDef(
            "sort",
            branches=("main",),
            objects=("sort_zone", "item"),
            frames=FrameSpec(("robot", "sort_zone")),
            demos_per_branch=3,
        ),
    }
    fixtures = {
        "bin": Pose.planar(0.0, 0.0, 0.0),
        "scanner": Pose.planar(0.42, 0.28, 0.0),
        "drop_zone": Pose.planar(0.72, 0.10, 0.0),
        "sort_zone": Pose.planar(0.72, -0.22, 0.0),
    }
    edges = (
        (START, "pick_bin"),
        (START, "press_shift"),
        ("press_shift", "pick_bin"),
        ("pick_bin", "flip"),
        ("pick_bin", "scan"),
        ("flip", "scan"),
        ("scan", "drop_bin"),
        ("scan", "sort"),
        ("drop_bin", STOP),
        ("sort", STOP),
    )
    return ScenarioSpec(
        name="bin_sorting",
        skills=skills,
        fixtures=fixtures,
        item="item",
        home=Pose.planar(0.0, 0.42, 0.0),
        ground_truth_edges=edges,
    )


def assembly_spec() -> ScenarioSpec:
    """Desk-scale analog of the cap assembly task (synthetic plans only)."""
    frames_cap = FrameSpec(("platform", "cap"))
    skills = {
        "inspect": SkillDef(
            "inspect", ("main",), ("platform", "cap"), frames_cap, demos_per_branch=3
        ),
        "pick": SkillDef(
            "pick", ("top", "side_left", "side_right"), ("platform", "cap"), frames_cap
        ),
        "re_orient": SkillDef(
            "re_orient", ("from_left", "from_right"), ("platform", "cap"), frames_cap
        ),
        "translate": SkillDef(
            "translate", ("main",), ("platform", "cap"), frames_cap, demos_per_branch=3
        ),
        "attach": SkillDef(
            "attach", ("main",), ("peg", "cap"), FrameSpec(("cap", "peg")), demos_per_branch=3
        ),
        "drop": SkillDef(
            "drop", ("to_pallet", "to_buffer"), ("pallet", "cap"), FrameSpec(("cap", "pallet"))
        ),
    }
    fixtures = {
        "platform": Pose.planar(0.0, 0.0, 0.0),
        "peg": Pose.planar(0.5, 0.2, 0.0),
        "pallet": Pose.planar(0.5, -0.2, 0.0),
    }
    edges = (
        (START, "inspect"),
        ("inspect", "pick"),
        ("inspect", "re_orient"),
        ("re_orient", "pick"),
        ("pick", "translate"),
        ("translate", "pick"),
        ("pick", "attach"),
        ("pick", "drop"),
        ("attach", STOP),
        ("drop", STOP),
    )
    return ScenarioSpec(
        name="assembly",
        skills=skills,
        fixtures=fixtures,
        item="cap",
        home=Pose.planar(0.0, 0.4, 0.0),
        ground_truth_edges=edges,
    )


SCENARIOS = {
    "bin_sorting": bin_sorting_spec,
    "assembly": assembly_spec,
}


def get_scenario(name: str) -> ScenarioSpec:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; have {sorted(SCENARIOS)}")
    return SCENARIOS[name]()


# -- bin-frame helpers --------------------------------------------------------

def bin_local_xy(state: WorldState, spec: ScenarioSpec) -> np.ndarray:
    """Item position expressed in the bin frame (planar)."""
    bin_frame = Frame.from_pose(state.object("bin"), planar=True)
    local = bin_frame.rotation.T @ (
        state.object(spec.item).position - bin_frame.origin
    )
    return local[:2]


def wall_distances(xy: np.ndarray, geom: BinGeometry) -> dict[str, float]:
    hw, hh = geom.half
    return {
        "left": xy[0] + hw,
        "right": hw - xy[0],
        "front": xy[1] + hh,
        "back": hh - xy[1],
    }


def _near(d: float, threshold: float) -> bool:
    # negative distances mean outside the bin; those are not "near a wall"
    return -1e-9 <= d < threshold


def near_walls(xy: np.ndarray, geom: BinGeometry) -> list[str]:
    dists = wall_distances(xy, geom)
    return [w for w in WALLS if _near(dists[w], geom.wall_threshold)]


def corner_of(xy: np.ndarray, geom: BinGeometry) -> str | None:
    """Corner id when the item is within the corner threshold of two walls."""
    d = wall_distances(xy, geom)
    horizontal = [w for w in ("left", "right") if _near(d[w], geom.corner_threshold)]
    vertical = [w for w in ("front", "back") if _near(d[w], geom.corner_threshold)]
    if horizontal and vertical:
        return f"{horizontal[0]}_{vertical[0]}"
    return None


def pick_branch_rule(xy: np.ndarray, geom: BinGeometry) -> str:
    """Nearest wall within threshold, else center; ties by wall order."""
    dists = wall_distances(xy, geom)
    near = [
        (dists[w], WALLS.index(w), w)
        for w in WALLS
        if _near(dists[w], geom.wall_threshold)
    ]
    if not near:
        return "center"
    return min(near)[2]


def barcode_up(pose: Pose) -> bool:
    """The scannable face points up when the pose's z axis does."""
    return float(pose.rotation()[2, 2]) > 0.0


FLIP_QUAT = np.array([0.0, 1.0, 0.0, 0.0])  # rotation by pi about x


def flipped_pose(pose: Pose) -> Pose:
    """Toggle the face-down state while preserving position and heading."""
    from ..geometry import quat_from_yaw, quat_multiply

    yaw = pose.yaw
    if barcode_up(pose):
        quat = quat_multiply(quat_from_yaw(yaw), FLIP_QUAT)
    else:
        quat = quat_from_yaw(yaw)
    return Pose(pose.position, quat)
