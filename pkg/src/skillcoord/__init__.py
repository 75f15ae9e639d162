"""Skill coordination from few demonstrations with a human in the loop.

Core pieces: task-parameterized HSMM skill models with branch selectors,
a geometric task network over the skills, LQG trajectory retrieval, and an
execution engine that turns every low-confidence decision into an operator
query whose answer improves the selectors on the fly.
"""

from .geometry import (
    EdgeFeatureSpec,
    EntityMismatchError,
    Frame,
    FrameSpec,
    Pose,
    WorldState,
    compose,
    edge_feature,
    frames_from_state,
    project_to_frame,
    relative_transform,
    skill_feature,
)
from .selectors import (
    DegenerateLabelsError,
    GaussianPrecondition,
    LogisticSelector,
    TrainingSet,
    add_point_and_refit,
    fit_gaussian_precondition,
    fit_ovr_logistic,
    predict_gaussian_precondition,
    predict_ovr,
)
from .hsmm import (
    Demonstration,
    InfeasibleHorizonError,
    SkillModel,
    fit_skill_model,
    global_gmm,
    select_branch,
    viterbi_components,
)
from .lqr import Trajectory, lqg_retrieve
from .network import START, STOP, AugmentedState, Plan, TaskNetwork
from .execution import (
    ExecConfig,
    ExecutionEngine,
    ExecutionTrace,
    TaskInstance,
    goal_reached,
    retrieve_trajectory,
    run_task,
)

__version__ = "0.1.0"
