"""Scripted operator: deterministic geometric rules answering every query.

Stands in for the human during automated runs. All rules read the current
world state only (bin-relative), so the oracle is invariant to where the
scene sits in the workspace.
"""

from __future__ import annotations

import numpy as np

from ..geometry import WorldState
from ..network import STOP
from .scenario import (
    CORNERS,
    ScenarioSpec,
    barcode_up,
    bin_local_xy,
    corner_of,
    pick_branch_rule,
    wall_distances,
)
from .world import item_held


class OracleInstructor:
    """Rule-based instruction provider for the bin-sorting scenario."""

    def __init__(self, spec: ScenarioSpec):
        if spec.name != "bin_sorting":
            raise ValueError(f"no oracle rules for scenario {spec.name!r}")
        self.spec = spec

    # -- InstructionProvider interface ---------------------------------------

    def next_skill_query(self, state, goal, options) -> str:
        answer = self.plan_next(state, goal)
        if answer not in options:
            raise AssertionError(f"oracle chose unavailable option {answer!r}")
        return answer

    def branch_query(self, skill, state, options) -> str:
        answer = self.branch_for(skill, state)
        if answer not in options:
            raise AssertionError(f"oracle chose unavailable branch {answer!r}")
        return answer

    # -- rules ------------------------------------------------------------------

    def plan_next(self, state: WorldState, goal: WorldState) -> str:
        spec = self.spec
        item = state.object(spec.item)
        goal_item = goal.object(spec.item)
        if not item_held(state, spec):
            if np.linalg.norm(item.position[:2] - goal_item.position[:2]) <= 0.01:
                return STOP  # already placed, nothing left to do
            xy = bin_local_xy(state, spec)
            if corner_of(xy, spec.bin_geom) is not None:
                return "press_shift"
            return "pick_bin"
        if not barcode_up(item):
            return "flip"
        scanner = state.object("scanner")
        if np.linalg.norm(item.position[:2] - scanner.position[:2]) > spec.scan_radius:
            return "scan"
        drop = state.object("drop_zone").position[:2]
        sort = state.object("sort_zone").position[:2]
        target = goal_item.position[:2]
        if np.linalg.norm(target - drop) <= np.linalg.norm(target - sort):
            return "drop_bin"
        return "sort"

    def branch_for(self, skill: str, state: WorldState) -> str:
        spec = self.spec
        if skill == "pick_bin":
            return pick_branch_rule(bin_local_xy(state, spec), spec.bin_geom)
        if skill == "press_shift":
            xy = bin_local_xy(state, spec)
            corner = corner_of(xy, spec.bin_geom)
            if corner is not None:
                return corner
            # defensive: nearest corner by wall distances
            d = wall_distances(xy, spec.bin_geom)
            h = "left" if d["left"] <= d["right"] else "right"
            v = "front" if d["front"] <= d["back"] else "back"
            return f"{h}_{v}"
        return "main"
