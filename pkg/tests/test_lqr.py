import numpy as np
import pytest

from skillcoord.lqr import Trajectory, lqg_retrieve, _double_integrator
from skillcoord.hsmm import OBS_DIM


def isotropic(mean, var):
    return np.asarray(mean, dtype=float), var * np.eye(OBS_DIM)


def test_reaches_tight_target():
    target = np.array([0.3, -0.2, 0.1, 0.5, 1.0])
    gaussians = [isotropic(target, 1e-6)]
    seq = np.zeros(80, dtype=int)
    traj = lqg_retrieve(gaussians, seq, np.zeros(OBS_DIM))
    assert np.linalg.norm(traj.end - target) < 1e-3


def test_rollout_consistent_with_returned_controls():
    # independent forward simulation through the plant reproduces the states
    target = np.array([0.2, 0.1, 0.0, 0.0, 0.0])
    gaussians = [isotropic(target, 1e-4)]
    seq = np.zeros(40, dtype=int)
    traj = lqg_retrieve(gaussians, seq, np.zeros(OBS_DIM))
    a, b = _double_integrator(OBS_DIM, traj.dt)
    x = np.zeros(2 * OBS_DIM)
    for t in range(len(traj)):
        x = a @ x + b @ traj.controls[t]
        np.testing.assert_allclose(x[:OBS_DIM], traj.states[t], atol=1e-12)


def test_equilibrium_start_needs_no_control():
    mu = np.array([0.1, 0.2, 0.0, -0.3, 1.0])
    gaussians = [isotropic(mu, 1e-4)]
    seq = np.zeros(30, dtype=int)
    traj = lqg_retrieve(gaussians, seq, mu)
    assert np.max(np.abs(traj.controls)) < 1e-6
    assert np.max(np.abs(traj.states - mu)) < 1e-6


def test_tighter_via_point_tracks_closer():
    start = np.zeros(OBS_DIM)
    via = np.array([0.2, 0.2, 0.0, 0.0, 0.0])
    end = np.array([0.4, 0.0, 0.0, 0.0, 0.0])
    seq = np.array([0] * 20 + [1] * 20)

    def via_error(via_var):
        gaussians = [(via, via_var * np.eye(OBS_DIM)), isotropic(end, 1e-5)]
        traj = lqg_retrieve(gaussians, seq, start)
        return np.linalg.norm(traj.states[19] - via)

    loose = via_error(1e-2)
    tight = via_error(1e-4)
    assert tight < loose


def test_lengths_match_horizon():
    gaussians = [isotropic(np.zeros(OBS_DIM), 1e-3)]
    traj = lqg_retrieve(gaussians, np.zeros(17, dtype=int), np.ones(OBS_DIM))
    assert len(traj) == 17
    assert traj.states.shape == (17, OBS_DIM)
    assert traj.controls.shape == (17, OBS_DIM)


def test_non_positive_definite_covariance_rejected():
    bad = np.zeros(OBS_DIM)
    cov = np.eye(OBS_DIM)
    cov[0, 0] = 0.0
    with pytest.raises(ValueError):
        lqg_retrieve([(bad, cov)], np.zeros(5, dtype=int), np.zeros(OBS_DIM))


def test_trajectory_poses_and_gripper():
    states = np.zeros((3, OBS_DIM))
    states[:, 4] = [0.0, 0.6, 1.0]
    states[:, 3] = 0.5
    traj = Trajectory(states, np.zeros((3, OBS_DIM)))
    assert not traj.gripper_at(0) and traj.gripper_at(1) and traj.gripper_at(2)
    assert abs(traj.pose_at(1).yaw - 0.5) < 1e-12
