"""Independent reference implementations used to pin expected test values.

Everything here is deliberately written with different machinery than the
package code: 4x4 homogeneous matrices instead of quaternion algebra, scipy's
generic minimizer instead of the hand-rolled gradient descent, exhaustive
enumeration instead of dynamic programming.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize

from skillcoord.geometry import Frame, Pose


# -- homogeneous-matrix pose oracle -----------------------------------------

def pose_to_hmat(pose: Pose) -> np.ndarray:
    h = np.eye(4)
    h[:3, :3] = pose.rotation()
    h[:3, 3] = pose.position
    return h


def frame_to_hmat(frame: Frame) -> np.ndarray:
    h = np.eye(4)
    h[:3, :3] = frame.rotation
    h[:3, 3] = frame.origin
    return h


def hmat_compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def hmat_relative(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.inv(a) @ b


def random_pose(rng: np.random.Generator) -> Pose:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Pose(rng.uniform(-2.0, 2.0, size=3), q)


def random_frame(rng: np.random.Generator) -> Frame:
    return Frame.from_pose(random_pose(rng))


# -- generic convex-optimizer logistic oracle --------------------------------

def logistic_oracle_weights(
    features: np.ndarray, targets01: np.ndarray, lam: float
) -> np.ndarray:
    """Minimize the exact training loss (standardized features, bias last)."""
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    xs = (features - mean) / scale
    x1 = np.hstack([xs, np.ones((len(xs), 1))])

    def loss(beta):
        z = x1 @ beta
        signed = np.where(targets01 > 0.5, z, -z)
        return np.logaddexp(0.0, -signed).sum() + lam * beta @ beta

    res = minimize(loss, np.zeros(x1.shape[1]), method="BFGS", tol=1e-12)
    return res.x


# -- exhaustive segmentation decoders ----------------------------------------

def enumerate_viterbi(
    transitions: np.ndarray,
    dur_means: np.ndarray,
    dur_stds: np.ndarray,
    horizon: int,
    start_ll: np.ndarray | None = None,
    goal_ll: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Brute-force best segmentation (component changes between segments)."""
    k = len(dur_means)
    start_ll = np.zeros(k) if start_ll is None else start_ll
    goal_ll = np.zeros(k) if goal_ll is None else goal_ll

    def dur_logpdf(d, i):
        return (
            -0.5 * ((d - dur_means[i]) / dur_stds[i]) ** 2
            - np.log(dur_stds[i])
            - 0.5 * np.log(2.0 * np.pi)
        )

    best_score = -np.inf
    best_seq = None
    stack = [((), 0, 0.0, None)]  # (segments, covered, score, last comp)
    while stack:
        segments, covered, score, last = stack.pop()
        remaining = horizon - covered
        if remaining == 0:
            total = score + goal_ll[last]
            if total > best_score:
                best_score = total
                best_seq = segments
            continue
        for comp in range(k):
            if comp == last:
                continue
            for dur in range(1, remaining + 1):
                inc = dur_logpdf(dur, comp)
                if last is None:
                    inc += start_ll[comp]
                else:
                    if transitions[last, comp] <= 0.0:
                        continue
                    inc += np.log(transitions[last, comp])
                stack.append(
                    (segments + ((comp, dur),), covered + dur, score + inc, comp)
                )
    seq = np.concatenate([np.full(d, c, dtype=int) for c, d in best_seq])
    return seq, float(best_score)


def best_phase_split(data: np.ndarray, k: int) -> list[int]:
    """Exhaustive min-variance segmentation of a sequence into k contiguous phases."""
    t = len(data)
    best_cost = np.inf
    best_lengths = None
    for cuts in itertools.combinations(range(1, t), k - 1):
        bounds = (0,) + cuts + (t,)
        cost = 0.0
        for a, b in zip(bounds[:-1], bounds[1:]):
            seg = data[a:b]
            cost += ((seg - seg.mean(axis=0)) ** 2).sum()
        if cost < best_cost:
            best_cost = cost
            best_lengths = [b - a for a, b in zip(bounds[:-1], bounds[1:])]
    return best_lengths


# -- misc ---------------------------------------------------------------------

def gaussian_product_2(mu1, cov1, mu2, cov2):
    """Closed-form product of two Gaussians (mean, covariance)."""
    p1 = np.linalg.inv(cov1)
    p2 = np.linalg.inv(cov2)
    cov = np.linalg.inv(p1 + p2)
    mu = cov @ (p1 @ mu1 + p2 @ mu2)
    return mu, cov


def central_difference_grad(f, x, step=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g
