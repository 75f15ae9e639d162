"""Task-parameterized hidden semi-Markov skill models.

A skill holds one model per branch. Each branch model is a Gaussian mixture
stored per observation frame (task parameter), plus a transition matrix over
components and a Gaussian duration model per component. Demonstrations are
projected into every declared frame before fitting, so instantiating the
frames on a new scene adapts the skill to it.

The observation space is position (3) + yaw (1) + gripper (1), Euclidean.
Frames act on it affinely: positions rotate and translate, yaw shifts by the
frame heading, the gripper channel is frame-invariant. Yaw is unwrapped per
demonstration so the Euclidean statistics stay honest for planar scenes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    Frame,
    FrameSpec,
    Pose,
    WorldState,
    frames_from_state,
    quat_from_yaw,
    skill_feature,
)
from .selectors import LogisticSelector, TrainingSet, add_point_and_refit

OBS_DIM = 5
COV_FLOOR = 1e-4
DURATION_STD_FLOOR = 0.5
EM_MAX_ITER = 100
EM_TOL = 1e-8


class InfeasibleHorizonError(ValueError):
    """Decoding horizon shorter than the component count."""


def observation(state: WorldState) -> np.ndarray:
    """Flatten the end-effector state to [x, y, z, yaw, gripper]."""
    r = state.robot
    return np.array([
        r.position[0],
        r.position[1],
        r.position[2],
        r.yaw,
        1.0 if state.gripper_closed else 0.0,
    ])


def observation_pose(obs: np.ndarray) -> Pose:
    return Pose(np.asarray(obs[:3], dtype=float), quat_from_yaw(float(obs[3])))


def demo_observations(steps: Sequence[WorldState]) -> np.ndarray:
    """Stack observations of a demo, unwrapping yaw along time."""
    obs = np.stack([observation(s) for s in steps])
    obs[:, 3] = np.unwrap(obs[:, 3])
    return obs


def frame_affine(frame: Frame) -> tuple[np.ndarray, np.ndarray]:
    """Affine action of a frame on the observation space: global = M x + m."""
    m_lin = np.eye(OBS_DIM)
    m_lin[:3, :3] = frame.rotation
    offset = np.zeros(OBS_DIM)
    offset[:3] = frame.origin
    offset[3] = frame.yaw
    return m_lin, offset


def project_observations(obs: np.ndarray, frame: Frame) -> np.ndarray:
    m_lin, offset = frame_affine(frame)
    return (np.linalg.inv(m_lin) @ (obs - offset).T).T


@dataclass(frozen=True)
class Demonstration:
    """Timed state sequence with its branch label."""

    steps: tuple[WorldState, ...]
    branch: str
    skill: str
    dt: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.steps) < 2:
            raise ValueError("a demonstration needs at least two steps")

    @property
    def initial_state(self) -> WorldState:
        return self.steps[0]

    def __len__(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# branch model and EM fitting
# ---------------------------------------------------------------------------

@dataclass
class BranchModel:
    """Per-frame GMM plus transition and duration statistics of one branch."""

    priors: np.ndarray  # (K,)
    means: np.ndarray  # (K, P, OBS_DIM)
    covariances: np.ndarray  # (K, P, OBS_DIM, OBS_DIM)
    transitions: np.ndarray  # (K, K), rows stochastic, zero diagonal for K > 1
    duration_means: np.ndarray  # (K,)
    duration_stds: np.ndarray  # (K,)
    initial_weights: np.ndarray  # (K,) responsibility mass at t = 0
    final_weights: np.ndarray | None = None  # (K,) responsibility mass at t = T
    log_likelihoods: tuple[float, ...] = ()

    @property
    def n_components(self) -> int:
        return len(self.priors)

    @property
    def n_frames(self) -> int:
        return self.means.shape[1]


def _floor_spd(cov: np.ndarray, floor: float) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T


def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log density of rows of x under N(mean, cov)."""
    diff = x - mean
    sign, logdet = np.linalg.slogdet(cov)
    sol = np.linalg.solve(cov, diff.T).T
    maha = np.einsum("nd,nd->n", diff, sol)
    return -0.5 * (maha + logdet + x.shape[1] * np.log(2.0 * np.pi))


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def _em_fit(
    per_frame: np.ndarray, lengths: Sequence[int], n_components: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[float]]:
    """EM for a frame-replicated GMM on stacked demo steps.

    per_frame has shape (N, P, OBS_DIM); responsibilities are shared across
    frames (the product of per-frame densities is the emission likelihood).
    Initialization partitions each demo into equal-time chunks, which keeps
    the fit deterministic and the components temporally ordered.
    """
    n_total, n_frames, d = per_frame.shape
    k = n_components
    assign = np.concatenate(
        [np.minimum((np.arange(t) * k) // t, k - 1) for t in lengths]
    )
    resp = np.zeros((n_total, k))
    resp[np.arange(n_total), assign] = 1.0

    priors = np.empty(k)
    means = np.empty((k, n_frames, d))
    covs = np.empty((k, n_frames, d, d))
    lls: list[float] = []

    for _ in range(EM_MAX_ITER):
        # M step
        weight = resp.sum(axis=0)
        priors = weight / n_total
        for i in range(k):
            w = resp[:, i][:, None]
            for p in range(n_frames):
                mu = (w * per_frame[:, p]).sum(axis=0) / weight[i]
                diff = per_frame[:, p] - mu
                cov = (w * diff).T @ diff / weight[i]
                means[i, p] = mu
                covs[i, p] = _floor_spd(cov, COV_FLOOR)
        # E step
        log_r = np.tile(np.log(priors), (n_total, 1))
        for i in range(k):
            for p in range(n_frames):
                log_r[:, i] += _log_gauss(per_frame[:, p], means[i, p], covs[i, p])
        norm = _logsumexp(log_r, axis=1)
        lls.append(float(norm.sum()))
        resp = np.exp(log_r - norm[:, None])
        if len(lls) > 1 and abs(lls[-1] - lls[-2]) < EM_TOL * max(1.0, abs(lls[-2])):
            break
    return priors, means, covs, resp, lls


def _sequence_stats(
    resp: np.ndarray, lengths: Sequence[int], n_components: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Transitions, durations, and boundary weights from argmax assignments."""
    k = n_components
    counts = np.zeros((k, k))
    durations: list[list[float]] = [[] for _ in range(k)]
    initial = np.zeros(k)
    final = np.zeros(k)
    offset = 0
    for t in lengths:
        seq = np.argmax(resp[offset : offset + t], axis=1)
        initial += resp[offset]
        final += resp[offset + t - 1]
        run_comp = int(seq[0])
        run_len = 1
        for s in seq[1:]:
            s = int(s)
            if s == run_comp:
                run_len += 1
            else:
                counts[run_comp, s] += 1.0
                durations[run_comp].append(run_len)
                run_comp, run_len = s, 1
        durations[run_comp].append(run_len)
        offset += t
    all_runs = [d for per in durations for d in per]
    fallback = float(np.mean(all_runs)) if all_runs else 1.0
    dur_mean = np.array([
        float(np.mean(per)) if per else fallback for per in durations
    ])
    dur_std = np.array([
        max(float(np.std(per)), DURATION_STD_FLOOR) if per else DURATION_STD_FLOOR
        for per in durations
    ])
    trans = np.zeros((k, k))
    if k == 1:
        trans[0, 0] = 1.0
    else:
        for h in range(k):
            row = counts[h]
            if row.sum() > 0:
                trans[h] = row / row.sum()
            else:
                trans[h, np.arange(k) != h] = 1.0 / (k - 1)
    initial = initial / initial.sum()
    final = final / final.sum()
    return trans, dur_mean, dur_std, initial, final


# ---------------------------------------------------------------------------
# skill model
# ---------------------------------------------------------------------------

@dataclass
class SkillModel:
    """TP-HSMM of one skill: per-branch models plus the branch selector.

    ``branch_selector`` is None for single-branch skills; their only branch
    always scores 1.0. The selector's training set is kept so human answers
    can extend it and trigger a refit at run time.
    """

    skill: str
    objects: tuple[str, ...]
    frames: FrameSpec
    branches: dict[str, BranchModel]
    branch_selector: LogisticSelector | None
    branch_data: TrainingSet
    dt: float = 0.05
    lam: float = 1e-3

    @property
    def branch_ids(self) -> tuple[str, ...]:
        return tuple(self.branches)

    def branch_feature(self, state: WorldState) -> np.ndarray:
        return skill_feature(frames_from_state(state, self.frames))

    def branch_scores(self, state: WorldState) -> dict[str, float]:
        """Decision confidences per branch (softmax over selector logits)."""
        if self.branch_selector is None:
            return {b: 1.0 for b in self.branch_ids}
        return self.branch_selector.confidences(self.branch_feature(state))

    def add_branch_point(self, state: WorldState, branch: str) -> None:
        """Fold a human branch answer into the selector (full refit)."""
        y = self.branch_feature(state)
        if self.branch_selector is None:
            self.branch_data = self.branch_data.add(y, branch)
            if len(self.branch_data.classes) >= 2:
                self.branch_selector = LogisticSelector.fit(self.branch_data, self.lam)
        else:
            self.branch_selector, self.branch_data = add_point_and_refit(
                self.branch_selector, self.branch_data, y, branch
            )


def select_branch(
    model: SkillModel, state: WorldState, bound: float = 0.8
) -> tuple[dict[str, float], str | None]:
    """Branch scores and the best branch above the bound (None if no branch clears it)."""
    scores = model.branch_scores(state)
    best = None
    best_score = bound
    for b, s in scores.items():
        if s > best_score:
            best, best_score = b, s
    return scores, best


def fit_skill_model(
    demos: Sequence[Demonstration],
    n_components: int,
    frames: FrameSpec,
    objects: Sequence[str],
    skill: str | None = None,
    lam: float = 1e-3,
) -> SkillModel:
    """Fit per-branch TP-HSMMs and the branch selector from demonstrations."""
    if not demos:
        raise ValueError("no demonstrations given")
    skill = skill if skill is not None else demos[0].skill
    for d in demos:
        if d.branch is None:
            raise ValueError("demonstration without a branch label")
        if len(d) < n_components:
            raise ValueError(
                f"demonstration of length {len(d)} shorter than {n_components} components"
            )

    by_branch: dict[str, list[Demonstration]] = {}
    for d in demos:
        by_branch.setdefault(d.branch, []).append(d)

    branches: dict[str, BranchModel] = {}
    for branch, group in by_branch.items():
        projected = []
        lengths = []
        for demo in group:
            obs = demo_observations(demo.steps)
            demo_frames = frames_from_state(demo.initial_state, frames)
            per_frame = np.stack(
                [project_observations(obs, f) for f in demo_frames], axis=1
            )
            projected.append(per_frame)
            lengths.append(len(demo))
        stacked = np.concatenate(projected, axis=0)
        priors, means, covs, resp, lls = _em_fit(stacked, lengths, n_components)
        trans, dur_mean, dur_std, initial, final = _sequence_stats(
            resp, lengths, n_components
        )
        branches[branch] = BranchModel(
            priors, means, covs, trans, dur_mean, dur_std, initial, final, tuple(lls)
        )

    points = [
        (skill_feature(frames_from_state(d.initial_state, frames)), d.branch)
        for d in demos
    ]
    branch_data = TrainingSet.from_points(points)
    selector = (
        LogisticSelector.fit(branch_data, lam) if len(by_branch) >= 2 else None
    )
    return SkillModel(
        skill=skill,
        objects=tuple(objects),
        frames=frames,
        branches=branches,
        branch_selector=selector,
        branch_data=branch_data,
        dt=demos[0].dt,
        lam=lam,
    )


# ---------------------------------------------------------------------------
# global Gaussians (task-parameter product)
# ---------------------------------------------------------------------------

def global_gmm(
    model: SkillModel, branch: str, frames: Sequence[Frame]
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Map per-frame Gaussians to the world and fuse them per component.

    Each frame's Gaussian is transformed affinely and the results are
    combined by a precision-weighted product, which is how the skill
    generalizes to new frame instantiations.
    """
    bm = model.branches[branch]
    if len(frames) != bm.n_frames:
        raise ValueError(f"expected {bm.n_frames} frames, got {len(frames)}")
    affines = [frame_affine(f) for f in frames]
    fused = []
    for i in range(bm.n_components):
        precision = np.zeros((OBS_DIM, OBS_DIM))
        weighted = np.zeros(OBS_DIM)
        for p, (m_lin, offset) in enumerate(affines):
            mean_g = m_lin @ bm.means[i, p] + offset
            cov_g = m_lin @ bm.covariances[i, p] @ m_lin.T
            prec = np.linalg.inv(cov_g)
            precision += prec
            weighted += prec @ mean_g
        try:
            cov = np.linalg.inv(precision)
        except np.linalg.LinAlgError:
            warnings.warn("singular fused precision, applying floor", RuntimeWarning)
            cov = np.linalg.inv(precision + COV_FLOOR * np.eye(OBS_DIM))
        cov = _floor_spd(cov, 1e-12)
        fused.append((cov @ weighted, cov))
    return fused


# ---------------------------------------------------------------------------
# modified Viterbi over components and durations
# ---------------------------------------------------------------------------

def _log_norm_pdf(x: float, mean: float, std: float) -> float:
    return float(
        -0.5 * ((x - mean) / std) ** 2 - np.log(std) - 0.5 * np.log(2.0 * np.pi)
    )


def viterbi_components(
    model: SkillModel,
    branch: str,
    horizon: int,
    frames: Sequence[Frame] | None = None,
    start_obs: np.ndarray | None = None,
    goal_obs: np.ndarray | None = None,
) -> np.ndarray:
    """Most likely per-step component sequence for the given horizon.

    Scores a segmentation by transition log-probabilities between consecutive
    segments plus the duration log-density of each segment; consecutive
    segments must change component. When boundary observations are given
    (with the instantiated frames), the first segment additionally scores the
    start observation and the last segment the goal observation under the
    fused global Gaussians.
    """
    bm = model.branches[branch]
    k = bm.n_components
    if horizon < k:
        raise InfeasibleHorizonError(f"horizon {horizon} < {k} components")
    if k == 1:
        return np.zeros(horizon, dtype=int)

    start_ll = np.zeros(k)
    goal_ll = np.zeros(k)
    if frames is not None and (start_obs is not None or goal_obs is not None):
        gaussians = global_gmm(model, branch, frames)
        for i, (mu, cov) in enumerate(gaussians):
            if start_obs is not None:
                start_ll[i] = _log_gauss(
                    np.asarray(start_obs, dtype=float)[None, :], mu, cov
                )[0]
            if goal_obs is not None:
                goal_ll[i] = _log_gauss(
                    np.asarray(goal_obs, dtype=float)[None, :], mu, cov
                )[0]

    with np.errstate(divide="ignore"):
        log_trans = np.log(bm.transitions)
    np.fill_diagonal(log_trans, -np.inf)
    log_dur = np.array([
        [_log_norm_pdf(d, bm.duration_means[i], bm.duration_stds[i]) for i in range(k)]
        for d in range(horizon + 1)
    ])  # (horizon + 1, K), row d = duration d

    neg_inf = -np.inf
    best = np.full((horizon + 1, k), neg_inf)
    back: dict[tuple[int, int], tuple[int, int]] = {}
    for t in range(1, horizon + 1):
        for i in range(k):
            # segment of duration d ending at t in component i
            score_first = log_dur[t, i] + start_ll[i]  # segment covers 0..t
            if score_first > best[t, i]:
                best[t, i] = score_first
                back[(t, i)] = (0, -1)
            for d in range(1, t):
                base = log_dur[d, i]
                for h in range(k):
                    if h == i:
                        continue
                    prev = best[t - d, h]
                    if prev == neg_inf:
                        continue
                    cand = prev + log_trans[h, i] + base
                    if cand > best[t, i]:
                        best[t, i] = cand
                        back[(t, i)] = (t - d, h)
    final = best[horizon] + goal_ll
    last = int(np.argmax(final))
    seq = np.empty(horizon, dtype=int)
    t, comp = horizon, last
    while t > 0:
        t_prev, prev_comp = back[(t, comp)]
        seq[t_prev:t] = comp
        t, comp = t_prev, prev_comp
    return seq


def nominal_horizon(model: SkillModel, branch: str) -> int:
    """Rounded sum of the per-component duration means.

    Demonstrations visit every component once along the most likely duration
    path, so the total equals the average demo length.
    """
    bm = model.branches[branch]
    return max(int(round(float(bm.duration_means.sum()))), bm.n_components)
