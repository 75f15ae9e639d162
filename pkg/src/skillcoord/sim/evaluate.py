"""Evaluation sweeps: branch-map comparison, learning curves, baseline table.

These produce the artifact's "figures" as CSV rows. Every sweep is seeded
end to end and reports the constants it ran with.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..execution import ExecConfig, run_task
from ..geometry import Pose
from ..hsmm import SkillModel
from ..network import TaskNetwork
from ..selectors import fit_gaussian_precondition
from .oracle import OracleInstructor
from .scenario import ScenarioSpec, pick_branch_rule
from .tasks import SkillLibrary, sample_instance, train_skills
from .world import SimWorld


# -- Fig. 3 analog: branch map ---------------------------------------------------

@dataclass
class BranchMapResult:
    rows: list[tuple[float, float, str, str, str]]  # x, y, oracle, logistic, gaussian
    logistic_accuracy: float
    gaussian_accuracy: float
    grid_n: int
    seed: int


def eval_branch_map(
    pick_model: SkillModel, spec: ScenarioSpec, grid_n: int = 50, seed: int = 0
) -> BranchMapResult:
    """Predicted pick branch over an item-position lattice, both selector types."""
    geom = spec.bin_geom
    hw, hh = geom.half
    xs = np.linspace(-hw + 0.005, hw - 0.005, grid_n)
    ys = np.linspace(-hh + 0.005, hh - 0.005, grid_n)
    gaussian = fit_gaussian_precondition(pick_model.branch_data)
    selector = pick_model.branch_selector
    rows = []
    log_hits = 0
    gau_hits = 0
    for x in xs:
        for y in ys:
            state = spec.base_state(Pose.planar(float(x), float(y), 0.0))
            v = pick_model.branch_feature(state)
            truth = pick_branch_rule(np.array([x, y]), geom)
            log_pred = selector.best(v)
            gau_pred = gaussian.predict(v)
            log_hits += int(log_pred == truth)
            gau_hits += int(gau_pred == truth)
            rows.append((float(x), float(y), truth, log_pred, gau_pred))
    n = grid_n * grid_n
    return BranchMapResult(rows, log_hits / n, gau_hits / n, grid_n, seed)


def write_branch_map_csv(result: BranchMapResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "oracle_branch", "logistic_branch", "gaussian_branch"])
        writer.writerows(result.rows)


# -- Fig. 6 analog: learning curve ------------------------------------------------

@dataclass
class RunStats:
    index: int
    seed: int
    edge_queries: int
    branch_queries: int
    lowest_confidence: float
    success: bool
    steps: int
    outcome: str


@dataclass
class TrainedSystem:
    spec: ScenarioSpec
    library: SkillLibrary
    network: TaskNetwork
    runs: list[RunStats] = field(default_factory=list)

    @property
    def skills(self) -> dict[str, SkillModel]:
        return self.library.skills


def train_system(
    spec: ScenarioSpec,
    seed: int = 0,
    n_instances: int = 20,
    cfg: ExecConfig | None = None,
    network: TaskNetwork | None = None,
) -> TrainedSystem:
    """Alg-1 style training: fresh network, oracle answers, per-run stats."""
    cfg = cfg or ExecConfig()
    library = train_skills(spec, seed)
    network = network if network is not None else spec.network()
    oracle = OracleInstructor(spec)
    world = SimWorld(spec)
    system = TrainedSystem(spec, library, network)
    skills = library.skills
    for i in range(n_instances):
        run_seed = seed * 10_000 + i
        _, instance = sample_instance(spec, run_seed)
        network, skills, trace = run_task(
            network, skills, instance, cfg, oracle, world
        )
        system.runs.append(
            RunStats(
                index=i,
                seed=run_seed,
                edge_queries=trace.edge_query_count,
                branch_queries=trace.branch_query_count,
                lowest_confidence=trace.lowest_confidence(),
                success=trace.outcome == "success",
                steps=len(trace.steps),
                outcome=trace.outcome,
            )
        )
    system.network = network
    system.library.skills = skills
    return system


def windowed_trend_slope(values: list[float], window: int = 5) -> float:
    """Least-squares slope of window-averaged values."""
    v = np.asarray(values, dtype=float)
    means = np.array([
        v[i : i + window].mean() for i in range(0, len(v) - window + 1)
    ])
    x = np.arange(len(means), dtype=float)
    if len(means) < 2:
        return 0.0
    return float(np.polyfit(x, means, 1)[0])


def write_learning_curve_csv(system: TrainedSystem, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "execution",
            "seed",
            "edge_queries",
            "branch_queries",
            "cumulative_queries",
            "lowest_confidence",
            "success",
            "outcome",
        ])
        cumulative = 0
        for r in system.runs:
            cumulative += r.edge_queries + r.branch_queries
            writer.writerow([
                r.index,
                r.seed,
                r.edge_queries,
                r.branch_queries,
                cumulative,
                f"{r.lowest_confidence:.6f}",
                int(r.success),
                r.outcome,
            ])


def eval_learning_curve(
    spec: ScenarioSpec, n_instances: int = 20, seed: int = 0
) -> TrainedSystem:
    return train_system(spec, seed=seed, n_instances=n_instances)
