"""Finite-horizon LQG tracking of a time-indexed Gaussian sequence.

The plant is a discrete double integrator per observation dimension. The
state cost at step t is the Mahalanobis distance to the active component's
fused Gaussian, so tight components are tracked closely and wide ones
loosely. Solved by a backward Riccati recursion with a linear (tracking)
term, then rolled out forward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Pose
from .hsmm import OBS_DIM, observation_pose

DT = 0.05
CONTROL_COST = 1e-2


@dataclass(frozen=True)
class Trajectory:
    """End-effector states (T, OBS_DIM) and control inputs (T, OBS_DIM)."""

    states: np.ndarray
    controls: np.ndarray
    dt: float = DT

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        controls = np.asarray(self.controls, dtype=float)
        if states.shape != controls.shape:
            raise ValueError("states and controls must have matching shapes")
        states = states.copy()
        controls = controls.copy()
        states.setflags(write=False)
        controls.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def pose_at(self, t: int) -> Pose:
        return observation_pose(self.states[t])

    def gripper_at(self, t: int) -> bool:
        return bool(self.states[t, 4] > 0.5)

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :3]


def _double_integrator(n: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(n)
    a = np.block([[eye, dt * eye], [np.zeros((n, n)), eye]])
    b = np.vstack([0.5 * dt * dt * eye, dt * eye])
    return a, b


def lqg_retrieve(
    gaussians: Sequence[tuple[np.ndarray, np.ndarray]],
    sequence: np.ndarray,
    start: np.ndarray,
    dt: float = DT,
    control_cost: float = CONTROL_COST,
) -> Trajectory:
    """Track the component sequence through its global Gaussians.

    ``gaussians`` holds one (mean, covariance) pair per component,
    ``sequence`` the active component index per step. The start observation
    becomes the initial plant position with zero velocity.
    """
    sequence = np.asarray(sequence, dtype=int)
    horizon = len(sequence)
    n = OBS_DIM
    start = np.asarray(start, dtype=float).reshape(n)

    mus = np.empty((horizon, n))
    precisions = np.empty((horizon, n, n))
    for t, comp in enumerate(sequence):
        mu, cov = gaussians[comp]
        try:
            prec = np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"component {comp} covariance is singular") from exc
        if np.any(np.linalg.eigvalsh(cov) <= 0.0):
            raise ValueError(f"component {comp} covariance is not positive definite")
        mus[t] = mu
        precisions[t] = prec

    a, b = _double_integrator(n, dt)
    r = control_cost * np.eye(n)
    dim = 2 * n

    def q_of(t: int) -> tuple[np.ndarray, np.ndarray]:
        q = np.zeros((dim, dim))
        q[:n, :n] = precisions[t]
        ref = np.zeros(dim)
        ref[:n] = mus[t]
        return q, ref

    # value function V_t(x) = x' P x - 2 x' v + const
    q_term, ref_term = q_of(horizon - 1)
    p_mat = q_term
    v_vec = q_term @ ref_term
    gains: list[tuple[np.ndarray, np.ndarray]] = []
    for t in range(horizon - 2, -1, -1):
        h = r + b.T @ p_mat @ b
        k_fb = np.linalg.solve(h, b.T @ p_mat @ a)
        k_ff = np.linalg.solve(h, b.T @ v_vec)
        gains.append((k_fb, k_ff))
        q_t, ref_t = q_of(t)
        a_cl = a - b @ k_fb
        p_mat = q_t + a.T @ p_mat @ a_cl
        v_vec = q_t @ ref_t + a_cl.T @ v_vec
    gains.reverse()
    # first control (toward state x_1) uses the t = 0 value function tail
    h = r + b.T @ p_mat @ b
    k0_fb = np.linalg.solve(h, b.T @ p_mat @ a)
    k0_ff = np.linalg.solve(h, b.T @ v_vec)
    gains.insert(0, (k0_fb, k0_ff))

    x = np.concatenate([start, np.zeros(n)])
    states = np.empty((horizon, n))
    controls = np.empty((horizon, n))
    for t in range(horizon):
        k_fb, k_ff = gains[t]
        u = -k_fb @ x + k_ff
        x = a @ x + b @ u
        states[t] = x[:n]
        controls[t] = u
    return Trajectory(states, controls, dt)
