"""Geometric task network: skills as nodes, learned transition selectors.

The network grows monotonically from complete plans and from human answers
given at run time. Every edge keeps an archive of the raw decision-time
state pairs (state, goal); the per-node selector training sets are derived
from those archives, so refits, serialization, and alternative feature
baselines all work from one source of truth.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import EdgeFeatureSpec, FrameSpec, WorldState, edge_feature
from .selectors import LogisticSelector, TrainingSet

START = "start"
STOP = "stop"

Edge = tuple[str, str]


class MalformedPlanError(ValueError):
    """Plan does not alternate states and skills correctly."""


class UnknownSkillError(KeyError):
    """Instruction names a skill the network has no feature spec for."""


@dataclass(frozen=True)
class AugmentedState:
    """Decision-time state paired with the task goal."""

    state: WorldState
    goal: WorldState

    def __post_init__(self):
        if not self.state.same_entities(self.goal):
            raise ValueError("augmented state entities differ from goal entities")


@dataclass(frozen=True)
class Plan:
    """One solved instance: states s_0..s_G and the skills between them.

    The virtual start and stop skills are implicit: the plan reads
    start, states[0], skills[0], states[1], ..., states[-1], stop.
    """

    states: tuple[WorldState, ...]
    skills: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "skills", tuple(self.skills))
        if len(self.states) != len(self.skills) + 1:
            raise MalformedPlanError(
                f"{len(self.states)} states cannot alternate with {len(self.skills)} skills"
            )
        if not self.skills:
            raise MalformedPlanError("plan contains no skills")
        for a in self.skills:
            if a in (START, STOP):
                raise MalformedPlanError(f"virtual skill {a!r} inside plan body")

    @property
    def goal(self) -> WorldState:
        return self.states[-1]

    def triples(self) -> list[tuple[str, WorldState, str]]:
        """All (previous skill, decision state, next skill) triples."""
        nodes = (START,) + self.skills + (STOP,)
        return [
            (nodes[i], self.states[i], nodes[i + 1]) for i in range(len(self.skills) + 1)
        ]


@dataclass
class Decision:
    """Outcome of one edge choice at a node."""

    node: str
    scores: dict[str, float]
    chosen: str | None

    @property
    def query_needed(self) -> bool:
        return self.chosen is None

    @property
    def confidence(self) -> float:
        return max(self.scores.values()) if self.scores else 0.0


class TaskNetwork:
    """Directed skill graph with per-node edge selectors.

    ``feature_specs`` maps each known skill to the entity set and goal
    frames used for its outgoing-edge features. The virtual start node uses
    every entity of the scene; its spec is derived from the first state seen
    and frozen afterwards.
    """

    def __init__(
        self,
        feature_specs: Mapping[str, EdgeFeatureSpec],
        start_spec: EdgeFeatureSpec | None = None,
        lam: float = 1e-3,
    ):
        self.feature_specs = dict(feature_specs)
        self.start_spec = start_spec
        self.lam = lam
        # insertion-ordered: nodes appear when their first edge does
        self.archives: dict[Edge, list[AugmentedState]] = {}
        self.selectors: dict[str, LogisticSelector | None] = {}
        self._stale: set[str] = set()

    # -- structure ----------------------------------------------------------

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(self.archives)

    @property
    def nodes(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a, b in self.archives:
            seen.setdefault(a)
            seen.setdefault(b)
        return tuple(seen)

    def outgoing(self, node: str) -> tuple[str, ...]:
        return tuple(b for a, b in self.archives if a == node)

    def node_spec(self, node: str) -> EdgeFeatureSpec:
        if node == START:
            if self.start_spec is None:
                raise UnknownSkillError("start node spec not initialized yet")
            return self.start_spec
        if node not in self.feature_specs:
            raise UnknownSkillError(node)
        return self.feature_specs[node]

    def _ensure_start_spec(self, state: WorldState) -> None:
        if self.start_spec is None:
            self.start_spec = EdgeFeatureSpec(
                objects=state.object_ids,
                frames=FrameSpec(("global",) + state.object_ids, planar=True),
            )

    def _check_known(self, node: str) -> None:
        if node not in (START, STOP) and node not in self.feature_specs:
            raise UnknownSkillError(node)

    # -- learning -----------------------------------------------------------

    def ingest_plan(self, plan: Plan) -> "TaskNetwork":
        """Add every transition of a complete plan to the network."""
        self._ensure_start_spec(plan.states[0])
        for prev, state, nxt in plan.triples():
            self._check_known(prev)
            self._check_known(nxt)
            self.archives.setdefault((prev, nxt), []).append(
                AugmentedState(state, plan.goal)
            )
            self._stale.add(prev)
        return self

    def feature(self, node: str, state: WorldState, goal: WorldState) -> np.ndarray:
        """Decision feature of a node; overridable for baseline feature sets."""
        return edge_feature(state, goal, self.node_spec(node))

    def training_set(self, node: str) -> TrainingSet | None:
        """Selector training data of a node, rebuilt from the edge archives."""
        points = []
        for (a, b), archived in self.archives.items():
            if a != node:
                continue
            for aug in archived:
                points.append((self.feature(node, aug.state, aug.goal), b))
        if not points:
            return None
        return TrainingSet.from_points(points)

    def _refit(self, node: str) -> None:
        targets = self.outgoing(node)
        if len(targets) < 2:
            self.selectors[node] = None  # single edge: trivial score 1.0
        else:
            data = self.training_set(node)
            self.selectors[node] = LogisticSelector.fit(data, self.lam)
        self._stale.discard(node)

    def build_edge_selectors(self) -> "TaskNetwork":
        """Fit selectors for every node with outgoing edges."""
        flagged = [
            n for n in self.nodes if n != STOP and not self.outgoing(n)
        ]
        if flagged:
            import warnings

            warnings.warn(
                f"nodes without outgoing edges will always query: {flagged}",
                RuntimeWarning,
            )
        for node in self.nodes:
            if node != STOP and self.outgoing(node):
                self._refit(node)
        return self

    # -- decisions ----------------------------------------------------------

    def edge_scores(self, node: str, state: WorldState, goal: WorldState) -> dict[str, float]:
        targets = self.outgoing(node)
        if not targets:
            return {}
        if len(targets) == 1:
            return {targets[0]: 1.0}
        if node in self._stale or node not in self.selectors:
            self._refit(node)
        selector = self.selectors[node]
        return selector.confidences(self.feature(node, state, goal))

    def next_skill(
        self, node: str, state: WorldState, goal: WorldState, bound: float = 0.8
    ) -> Decision:
        """Best outgoing edge above the bound, or a query-needed decision."""
        scores = self.edge_scores(node, state, goal)
        chosen = None
        best = bound
        for target, score in scores.items():
            if score > best:
                chosen, best = target, score
        return Decision(node=node, scores=scores, chosen=chosen)

    def apply_instruction(
        self, node: str, state: WorldState, goal: WorldState, chosen: str
    ) -> "TaskNetwork":
        """Fold a human answer in: archive the point, add the edge, refit."""
        self._check_known(node)
        self._check_known(chosen)
        if chosen == START:
            raise UnknownSkillError("start cannot be a successor")
        self._ensure_start_spec(state)
        self.archives.setdefault((node, chosen), []).append(
            AugmentedState(state, goal)
        )
        self._refit(node)
        return self

    # -- bookkeeping ---------------------------------------------------------

    def archive_size(self, node: str) -> int:
        return sum(len(v) for (a, _), v in self.archives.items() if a == node)

    def snapshot(self) -> "TaskNetwork":
        return copy.deepcopy(self)
