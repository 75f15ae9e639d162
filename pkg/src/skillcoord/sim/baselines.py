"""Baseline variants and the comparison table.

Three variants share one trained system and one set of evaluation scenes:

* gtn: the full system (frame-relative features, logistic selectors);
* tph: same network, but branch choice by per-branch Gaussian preconditions;
* ful: logistic selectors fed absolute full-state features instead of the
  relative ones, trained on the same demos and decision archives.

Decision accuracy counts only real decisions (two or more options). Task
success runs each variant autonomously with negligible confidence bounds;
a query with no options aborts the run and counts as failure.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from ..execution import ExecConfig, ExecutionEngine, TaskInstance
from ..geometry import Pose, WorldState, transform_state
from ..hsmm import SkillModel
from ..network import START, STOP, TaskNetwork
from ..selectors import GaussianPrecondition, LogisticSelector, TrainingSet
from .evaluate import TrainedSystem
from .oracle import OracleInstructor
from .scenario import ScenarioSpec
from .tasks import sample_instance
from .world import SimWorld

EVAL_BOUND = 1e-9


def absolute_feature(state: WorldState) -> np.ndarray:
    """Full system state flattened: robot pose, gripper, all object poses."""
    parts = [state.robot.position, state.robot.orientation, [float(state.gripper_closed)]]
    for oid in state.object_ids:
        pose = state.object(oid)
        parts.append(pose.position)
        parts.append(pose.orientation)
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


class GaussianBranchAdapter:
    """Duck-typed stand-in for a LogisticSelector over branch features."""

    def __init__(self, model: GaussianPrecondition):
        self.model = model
        self.classes = model.classes

    def scores(self, y: np.ndarray) -> dict[str, float]:
        return self.model.posteriors(y)

    def confidences(self, y: np.ndarray) -> dict[str, float]:
        return self.model.posteriors(y)


class FulSkillModel(SkillModel):
    """Skill model whose branch features are the absolute system state."""

    def branch_feature(self, state: WorldState) -> np.ndarray:
        return absolute_feature(state)


class FulTaskNetwork(TaskNetwork):
    """Task network whose edge features are absolute current+goal states."""

    def feature(self, node: str, state: WorldState, goal: WorldState) -> np.ndarray:
        return np.concatenate([absolute_feature(state), absolute_feature(goal)])


def _clone_fields(model: SkillModel) -> dict:
    return {f.name: getattr(model, f.name) for f in dataclasses.fields(SkillModel)}


def make_tph_skills(skills: dict[str, SkillModel]) -> dict[str, SkillModel]:
    out = {}
    for name, model in skills.items():
        fields_ = _clone_fields(model)
        if len(model.branch_ids) >= 2:
            fields_["branch_selector"] = GaussianBranchAdapter(
                GaussianPrecondition.fit(model.branch_data)
            )
        out[name] = SkillModel(**fields_)
    return out


def make_ful_skills(system: TrainedSystem) -> dict[str, SkillModel]:
    out = {}
    for name, model in system.skills.items():
        fields_ = _clone_fields(model)
        demos = system.library.demos[name]
        data = TrainingSet.from_points(
            [(absolute_feature(d.initial_state), d.branch) for d in demos]
        )
        fields_["branch_data"] = data
        fields_["branch_selector"] = (
            LogisticSelector.fit(data, model.lam) if len(data.classes) >= 2 else None
        )
        out[name] = FulSkillModel(**fields_)
    return out


def make_ful_network(network: TaskNetwork) -> FulTaskNetwork:
    ful = FulTaskNetwork(network.feature_specs, start_spec=network.start_spec, lam=network.lam)
    for edge, archived in network.archives.items():
        ful.archives[edge] = list(archived)
    ful.build_edge_selectors()
    return ful


@dataclass
class Variant:
    name: str
    network: TaskNetwork
    skills: dict[str, SkillModel]
    learn_time: float = 0.0


def build_variants(system: TrainedSystem) -> list[Variant]:
    t0 = time.perf_counter()
    gtn_net = system.network
    gtn_net.build_edge_selectors()
    gtn = Variant("gtn", gtn_net, system.skills, time.perf_counter() - t0)

    t0 = time.perf_counter()
    tph = Variant(
        "tph", system.network, make_tph_skills(system.skills), time.perf_counter() - t0
    )

    t0 = time.perf_counter()
    ful = Variant(
        "ful",
        make_ful_network(system.network),
        make_ful_skills(system),
        time.perf_counter() - t0,
    )
    return [gtn, tph, ful]


# -- decision accuracy along oracle walks ------------------------------------------

@dataclass
class DecisionSample:
    state: WorldState
    goal: WorldState
    node: str
    kind: str  # "edge" | "branch"
    skill: str | None
    truth: str


def collect_decision_points(
    system: TrainedSystem, instances: list[TaskInstance], max_steps: int = 12
) -> list[DecisionSample]:
    """Walk each instance with oracle decisions, recording every real choice."""
    from ..execution import goal_reached, retrieve_trajectory

    spec = system.spec
    oracle = OracleInstructor(spec)
    world = SimWorld(spec)
    cfg = ExecConfig()
    samples = []
    for instance in instances:
        state = instance.start
        node = START
        for _ in range(max_steps):
            if goal_reached(state, instance.goal, cfg):
                break
            nxt = oracle.plan_next(state, instance.goal)
            if nxt == STOP:
                break
            samples.append(
                DecisionSample(state, instance.goal, node, "edge", None, nxt)
            )
            skill = system.skills[nxt]
            branch = oracle.branch_for(nxt, state)
            if len(skill.branch_ids) >= 2:
                samples.append(
                    DecisionSample(state, instance.goal, node, "branch", nxt, branch)
                )
            trajectory = retrieve_trajectory(skill, branch, state)
            state, failure = world.step(state, nxt, branch, trajectory)
            node = nxt
            if failure is not None:
                break
    return samples


def _predict(variant: Variant, sample: DecisionSample) -> str | None:
    if sample.kind == "edge":
        if sample.node not in variant.network.nodes:
            return None
        return variant.network.next_skill(
            sample.node, sample.state, sample.goal, EVAL_BOUND
        ).chosen
    skill = variant.skills[sample.skill]
    scores = skill.branch_scores(sample.state)
    return max(scores.items(), key=lambda kv: kv[1])[0]


def decision_accuracy(
    variant: Variant, samples: list[DecisionSample], shift: Pose | None = None
) -> float:
    if not samples:
        return 0.0
    hits = 0
    for sample in samples:
        if shift is not None:
            sample = dataclasses.replace(
                sample,
                state=transform_state(shift, sample.state),
                goal=transform_state(shift, sample.goal),
            )
        hits += int(_predict(variant, sample) == sample.truth)
    return hits / len(samples)


# -- autonomous rollouts --------------------------------------------------------

@dataclass
class RolloutStats:
    task_success: float
    skill_success: float
    decide_time: float  # seconds per decision


def rollout(variant: Variant, spec: ScenarioSpec, instances: list[TaskInstance]) -> RolloutStats:
    cfg = ExecConfig(edge_bound=EVAL_BOUND, branch_bound=EVAL_BOUND, max_steps=12)
    world = SimWorld(spec)
    successes = 0
    skill_ok = 0
    skill_total = 0
    decisions = 0
    decide_time = 0.0
    for instance in instances:
        engine = ExecutionEngine(variant.network, variant.skills, world, instance, cfg)
        while engine.status != "done":
            t0 = time.perf_counter()
            engine.run_to_pause()
            decide_time += time.perf_counter() - t0
            if engine.status == "awaiting-instruction":
                engine._finish("abort", "query during autonomous evaluation")
        trace = engine.trace
        decisions += len(trace.decisions)
        successes += int(trace.outcome == "success")
        skill_total += len(trace.steps)
        skill_ok += sum(int(s.skill_ok) for s in trace.steps)
    return RolloutStats(
        task_success=successes / len(instances),
        skill_success=skill_ok / max(skill_total, 1),
        decide_time=decide_time / max(decisions, 1),
    )


# -- the table ----------------------------------------------------------------------

@dataclass
class BaselineRow:
    variant: str
    learn_time: float
    decide_time: float
    skill_success: float
    task_success: float
    decision_accuracy: float
    translated_accuracy: float


def compare_baselines(
    system: TrainedSystem,
    n_eval: int = 50,
    seed: int = 7_000,
    translation: tuple[float, float] = (0.5, 0.35),
) -> list[BaselineRow]:
    """GTN vs TPH vs FUL on identical held-out scenes."""
    spec = system.spec
    instances = [sample_instance(spec, seed + i)[1] for i in range(n_eval)]
    samples = collect_decision_points(system, instances)
    shift = Pose.planar(translation[0], translation[1], 0.0)
    rows = []
    for variant in build_variants(system):
        stats = rollout(variant, spec, instances)
        rows.append(
            BaselineRow(
                variant=variant.name,
                learn_time=variant.learn_time,
                decide_time=stats.decide_time,
                skill_success=stats.skill_success,
                task_success=stats.task_success,
                decision_accuracy=decision_accuracy(variant, samples),
                translated_accuracy=decision_accuracy(variant, samples, shift=shift),
            )
        )
    return rows


def write_baselines_csv(rows: list[BaselineRow], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "variant",
            "learn_time_s",
            "decide_time_s",
            "skill_success",
            "task_success",
            "decision_accuracy",
            "translated_decision_accuracy",
        ])
        for r in rows:
            writer.writerow([
                r.variant,
                f"{r.learn_time:.4f}",
                f"{r.decide_time:.6f}",
                f"{r.skill_success:.4f}",
                f"{r.task_success:.4f}",
                f"{r.decision_accuracy:.4f}",
                f"{r.translated_accuracy:.4f}",
            ])
