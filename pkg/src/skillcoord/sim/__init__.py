"""Synthetic workspace, demonstration generators, oracle, and evaluations."""

from .scenario import (
    SCENARIOS,
    ScenarioSpec,
    assembly_spec,
    bin_sorting_spec,
    get_scenario,
)
from .demos import all_demos, synth_demos
from .world import Scene, SimWorld, apply_skill_effect, item_held
from .oracle import OracleInstructor
from .plans import make_assembly_plans
from .tasks import SkillLibrary, sample_instance, sample_scene, train_skills
from .evaluate import (
    BranchMapResult,
    TrainedSystem,
    eval_branch_map,
    eval_learning_curve,
    train_system,
    windowed_trend_slope,
    write_branch_map_csv,
    write_learning_curve_csv,
)
from .baselines import (
    BaselineRow,
    compare_baselines,
    write_baselines_csv,
)
