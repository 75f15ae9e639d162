"""Interleaved execution and learning of the task network and skills.

The engine advances one outer iteration at a time: choose the next skill at
the current node, choose its branch, retrieve a trajectory, and step the
world. Whenever a confidence bound is not met the engine pauses with a
pending query; answers are folded back into the selectors before execution
resumes. ``run_task`` drives the engine with a synchronous instruction
provider (a scripted oracle in tests, a human via the session service).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .geometry import WorldState, frames_from_state, quat_angle
from .hsmm import (
    SkillModel,
    global_gmm,
    nominal_horizon,
    observation,
    select_branch,
    viterbi_components,
)
from .lqr import Trajectory, lqg_retrieve
from .network import START, STOP, TaskNetwork


@dataclass(frozen=True)
class TaskInstance:
    """Initial state and desired goal state over the same entities."""

    start: WorldState
    goal: WorldState

    def __post_init__(self):
        if not self.start.same_entities(self.goal):
            raise ValueError("instance start and goal describe different entities")


@dataclass(frozen=True)
class ExecConfig:
    edge_bound: float = 0.8
    branch_bound: float = 0.8
    pos_tol: float = 1e-2
    ang_tol: float = float(np.radians(5.0))
    max_steps: int = 20
    query_timeout: float = 120.0

    def __post_init__(self):
        if not (0.0 < self.edge_bound < 1.0 and 0.0 < self.branch_bound < 1.0):
            raise ValueError("confidence bounds must lie in (0, 1)")
        if self.pos_tol <= 0.0 or self.ang_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


def goal_reached(state: WorldState, goal: WorldState, cfg: ExecConfig) -> bool:
    """True when every object sits within tolerance of its goal pose (closed bounds)."""
    if not state.same_entities(goal):
        raise ValueError("states describe different entities")
    for oid in state.object_ids:
        cur, tgt = state.object(oid), goal.object(oid)
        if np.linalg.norm(cur.position - tgt.position) > cfg.pos_tol:
            return False
        if quat_angle(cur.orientation, tgt.orientation) > cfg.ang_tol:
            return False
    return True


@dataclass
class DecisionRecord:
    """One confidence check, either resolved autonomously or queried."""

    kind: str  # "edge" | "branch"
    node: str
    confidence: float
    queried: bool
    chosen: str | None = None


@dataclass
class StepRecord:
    """One executed skill (a world step)."""

    index: int
    state: WorldState
    skill: str
    branch: str | None
    edge_scores: dict[str, float]
    branch_scores: dict[str, float]
    edge_queried: bool
    branch_queried: bool
    skill_ok: bool = True
    failure: str | None = None
    trajectory_length: int = 0

    @property
    def edge_confidence(self) -> float:
        return max(self.edge_scores.values()) if self.edge_scores else 0.0

    @property
    def branch_confidence(self) -> float:
        return max(self.branch_scores.values()) if self.branch_scores else 0.0


@dataclass
class ExecutionTrace:
    steps: list[StepRecord] = field(default_factory=list)
    decisions: list[DecisionRecord] = field(default_factory=list)
    outcome: str | None = None  # success | step-cap | abort
    reason: str | None = None

    @property
    def edge_query_count(self) -> int:
        return sum(1 for d in self.decisions if d.kind == "edge" and d.queried)

    @property
    def branch_query_count(self) -> int:
        return sum(1 for d in self.decisions if d.kind == "branch" and d.queried)

    @property
    def query_count(self) -> int:
        return self.edge_query_count + self.branch_query_count

    def lowest_confidence(self) -> float:
        """Min over all decisions of the best available score (queries included)."""
        if not self.decisions:
            return 1.0
        return min(d.confidence for d in self.decisions)


class InstructionProvider(Protocol):
    def next_skill_query(
        self, state: WorldState, goal: WorldState, options: Sequence[str]
    ) -> str: ...

    def branch_query(
        self, skill: str, state: WorldState, options: Sequence[str]
    ) -> str: ...


class WorldModel(Protocol):
    def step(
        self, state: WorldState, skill: str, branch: str, trajectory: Trajectory
    ) -> tuple[WorldState, str | None]:
        """Apply the skill effect; returns (new state, failure reason or None)."""
        ...


@dataclass
class PendingQuery:
    kind: str  # "edge" | "branch"
    node: str
    skill: str | None
    options: tuple[str, ...]
    scores: dict[str, float]
    state: WorldState


class ProtocolError(RuntimeError):
    """Engine driven out of order (e.g. stepping while a query is pending)."""


class InvalidAnswerError(ValueError):
    """Instruction names an option that is not available."""


def retrieve_trajectory(
    skill: SkillModel, branch: str, state: WorldState
) -> Trajectory:
    """Instantiate the skill's frames on the state and track the decoded sequence.

    The decode is anchored on both ends: the current end-effector state and
    the fused mean of the component the demonstrations terminate in, which
    keeps the sequence from stalling in a mid-skill component.
    """
    frames = frames_from_state(state, skill.frames)
    gaussians = global_gmm(skill, branch, frames)
    horizon = nominal_horizon(skill, branch)
    bm = skill.branches[branch]
    goal_obs = None
    if bm.final_weights is not None:
        goal_obs = gaussians[int(np.argmax(bm.final_weights))][0]
    seq = viterbi_components(
        skill,
        branch,
        horizon,
        frames=frames,
        start_obs=observation(state),
        goal_obs=goal_obs,
    )
    return lqg_retrieve(gaussians, seq, observation(state), dt=skill.dt)


class ExecutionEngine:
    """Stepwise driver of one task instance.

    Owns the network and skill library it was given and mutates them as
    instructions arrive; callers that need isolation pass copies.
    """

    def __init__(
        self,
        network: TaskNetwork,
        skills: Mapping[str, SkillModel],
        world: WorldModel,
        instance: TaskInstance,
        cfg: ExecConfig | None = None,
    ):
        self.network = network
        self.skills = dict(skills)
        self.world = world
        self.instance = instance
        self.cfg = cfg or ExecConfig()
        self.state = instance.start
        self.node = START
        self.trace = ExecutionTrace()
        self.status = "idle"  # idle | running | awaiting-instruction | done
        self.pending: PendingQuery | None = None
        self._phase = "edge"  # edge | branch | execute
        self._record: StepRecord | None = None
        self._next_skill: str | None = None
        self._branch: str | None = None
        # set after a skill failure: the operator takes over the next decision
        self._force_query = False
        # decision contexts seen in this run; a revisit means the policy is
        # cycling without progress and the operator is consulted
        self._visited: set = set()
        self.network._ensure_start_spec(instance.start)

    # -- helpers ------------------------------------------------------------

    def _skill_options(self) -> tuple[str, ...]:
        return tuple(self.skills) + (STOP,)

    def _context_key(self) -> tuple:
        """Node plus a coarse (5 mm) state signature for cycle detection."""
        def grid(v):
            return tuple(np.round(np.asarray(v) / 0.005).astype(int).tolist())

        parts: list = [self.node, self.state.gripper_closed, grid(self.state.robot.position[:2])]
        for oid, pose in self.state.objects.items():
            parts.append((oid, grid(pose.position[:2]), bool(pose.rotation()[2, 2] > 0)))
        return tuple(parts)

    def _finish(self, outcome: str, reason: str | None = None) -> None:
        self.trace.outcome = outcome
        self.trace.reason = reason
        self.status = "done"
        self.pending = None

    # -- protocol -------------------------------------------------------------

    def step(self) -> StepRecord | None:
        """Advance one outer iteration; may pause on a pending query.

        Returns the completed step record, or None when the run finished or
        paused before executing a skill.
        """
        if self.status == "awaiting-instruction":
            raise ProtocolError("cannot step while awaiting an instruction")
        if self.status == "done":
            raise ProtocolError("run already finished")
        self.status = "running"

        if self._phase == "edge":
            if goal_reached(self.state, self.instance.goal, self.cfg):
                self._finish("success")
                return None
            if len(self.trace.steps) >= self.cfg.max_steps:
                self._finish("step-cap", f"exceeded {self.cfg.max_steps} skills")
                return None
            self._record = StepRecord(
                index=len(self.trace.steps),
                state=self.state,
                skill="",
                branch=None,
                edge_scores={},
                branch_scores={},
                edge_queried=False,
                branch_queried=False,
            )
            context = self._context_key()
            if context in self._visited:
                self._force_query = True  # cycling without progress
            self._visited.add(context)
            decision = self.network.next_skill(
                self.node, self.state, self.instance.goal, self.cfg.edge_bound
            )
            query_needed = decision.query_needed or self._force_query
            self._record.edge_scores = dict(decision.scores)
            self.trace.decisions.append(
                DecisionRecord(
                    kind="edge",
                    node=self.node,
                    confidence=decision.confidence,
                    queried=query_needed,
                    chosen=decision.chosen,
                )
            )
            if query_needed:
                self.pending = PendingQuery(
                    kind="edge",
                    node=self.node,
                    skill=None,
                    options=self._skill_options(),
                    scores=dict(decision.scores),
                    state=self.state,
                )
                self._record.edge_queried = True
                self.status = "awaiting-instruction"
                return None
            self._next_skill = decision.chosen
            self._phase = "branch"

        if self._phase == "branch":
            record = self._record
            record.skill = self._next_skill
            if self._next_skill == STOP:
                if goal_reached(self.state, self.instance.goal, self.cfg):
                    self._finish("success")
                else:
                    self._finish("abort", "network chose stop before the goal was reached")
                self._phase = "edge"
                return None
            skill = self.skills[self._next_skill]
            scores, best = select_branch(skill, self.state, self.cfg.branch_bound)
            query_needed = best is None or self._force_query
            record.branch_scores = dict(scores)
            self.trace.decisions.append(
                DecisionRecord(
                    kind="branch",
                    node=self._next_skill,
                    confidence=max(scores.values()) if scores else 0.0,
                    queried=query_needed,
                    chosen=best,
                )
            )
            if query_needed:
                self.pending = PendingQuery(
                    kind="branch",
                    node=self.node,
                    skill=self._next_skill,
                    options=skill.branch_ids,
                    scores=dict(scores),
                    state=self.state,
                )
                record.branch_queried = True
                self.status = "awaiting-instruction"
                return None
            self._branch = best
            self._phase = "execute"

        record = self._record
        record.branch = self._branch
        skill = self.skills[self._next_skill]
        trajectory = retrieve_trajectory(skill, self._branch, self.state)
        record.trajectory_length = len(trajectory)
        new_state, failure = self.world.step(
            self.state, self._next_skill, self._branch, trajectory
        )
        self.state = new_state
        executed = self._next_skill
        self.trace.steps.append(record)
        self._phase = "edge"
        self._record = None
        self._next_skill = None
        self._branch = None
        if failure is not None:
            # the world did not advance; stay at the current node and let the
            # operator take over the next decision (corrective teaching)
            record.skill_ok = False
            record.failure = failure
            self._force_query = True
        else:
            self.node = executed
            self._force_query = False
        return record

    def submit_instruction(self, answer: str) -> dict[str, float]:
        """Apply a human answer to the pending query; returns refreshed scores."""
        if self.status != "awaiting-instruction" or self.pending is None:
            raise ProtocolError("no pending query")
        pending = self.pending
        if pending.kind == "edge":
            if answer not in pending.options:
                raise InvalidAnswerError(f"{answer!r} is not a known skill")
            self.network.apply_instruction(
                pending.node, self.state, self.instance.goal, answer
            )
            refreshed = self.network.edge_scores(
                pending.node, self.state, self.instance.goal
            )
            self.trace.decisions[-1].chosen = answer
            self._next_skill = answer
            self._phase = "branch"
        else:
            if answer not in pending.options:
                raise InvalidAnswerError(
                    f"{answer!r} is not a branch of {pending.skill}"
                )
            skill = self.skills[pending.skill]
            skill.add_branch_point(self.state, answer)
            refreshed = skill.branch_scores(self.state)
            self.trace.decisions[-1].chosen = answer
            self._branch = answer
            self._phase = "execute"
        self.pending = None
        self.status = "running"
        return refreshed

    def run_to_pause(self) -> None:
        """Step until a query is pending or the run is done."""
        while self.status not in ("awaiting-instruction", "done"):
            self.step()


def run_task(
    network: TaskNetwork,
    skills: Mapping[str, SkillModel],
    instance: TaskInstance,
    cfg: ExecConfig,
    provider: InstructionProvider,
    world: WorldModel,
) -> tuple[TaskNetwork, dict[str, SkillModel], ExecutionTrace]:
    """Run one instance to completion, consulting the provider on every query."""
    engine = ExecutionEngine(network, skills, world, instance, cfg)
    while engine.status != "done":
        engine.run_to_pause()
        if engine.status == "awaiting-instruction":
            pending = engine.pending
            try:
                if pending.kind == "edge":
                    answer = provider.next_skill_query(
                        engine.state, instance.goal, pending.options
                    )
                else:
                    answer = provider.branch_query(
                        pending.skill, engine.state, pending.options
                    )
                engine.submit_instruction(answer)
            except InvalidAnswerError as exc:
                engine._finish("abort", str(exc))
    return engine.network, engine.skills, engine.trace
