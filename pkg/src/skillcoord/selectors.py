"""One-vs-rest logistic selectors and the Gaussian-precondition baseline.

The logistic selector is the decision model behind both branch and edge
choices: per class a binary logistic regression against the rest, fit on
standardized features with an appended bias, regularized by lam * ||beta||^2.
Scores are the raw per-class sigmoids and are deliberately not normalized
across classes, so a low maximum keeps meaning "no confident option".

Optimization is plain gradient descent with backtracking line search,
deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

DEFAULT_LAMBDA = 1e-3
GRAD_TOL = 1e-8
MAX_ITER = 500

Label = Hashable


class DegenerateLabelsError(ValueError):
    """Training data carries fewer than two distinct labels."""


@dataclass(frozen=True)
class TrainingSet:
    """Feature vectors with class labels; class order = first appearance."""

    features: np.ndarray
    labels: tuple[Label, ...]

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            feats = feats.reshape(len(self.labels), -1)
        if feats.shape[0] != len(self.labels):
            raise ValueError("feature count does not match label count")
        feats = feats.copy()
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", tuple(self.labels))

    @staticmethod
    def from_points(points: Sequence[tuple[np.ndarray, Label]]) -> "TrainingSet":
        if not points:
            raise ValueError("empty training set")
        feats = np.stack([np.asarray(y, dtype=float) for y, _ in points])
        return TrainingSet(feats, tuple(k for _, k in points))

    @property
    def classes(self) -> tuple[Label, ...]:
        seen: dict[Label, None] = {}
        for k in self.labels:
            seen.setdefault(k)
        return tuple(seen)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def add(self, y: np.ndarray, label: Label) -> "TrainingSet":
        y = np.asarray(y, dtype=float).reshape(1, -1)
        if y.shape[1] != self.dim:
            raise ValueError(f"point dimension {y.shape[1]} != {self.dim}")
        return TrainingSet(np.vstack([self.features, y]), self.labels + (label,))


def _standardize_params(feats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = feats.mean(axis=0)
    scale = feats.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)  # zero-variance dims pass through
    return mean, scale


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _nll(beta: np.ndarray, x1: np.ndarray, t: np.ndarray, lam: float) -> float:
    z = x1 @ beta
    # log(1 + exp(-z*t')) with t' in {-1, +1}, evaluated stably
    signed = np.where(t > 0.5, z, -z)
    loss = np.logaddexp(0.0, -signed).sum()
    return float(loss + lam * beta @ beta)


def _nll_grad(beta: np.ndarray, x1: np.ndarray, t: np.ndarray, lam: float) -> np.ndarray:
    return x1.T @ (_sigmoid(x1 @ beta) - t) + 2.0 * lam * beta


def _optimize_binary(
    x1: np.ndarray, t: np.ndarray, lam: float
) -> tuple[np.ndarray, list[float]]:
    """Gradient descent with backtracking; returns weights and loss path."""
    beta = np.zeros(x1.shape[1])
    losses = [_nll(beta, x1, t, lam)]
    step = 1.0
    for _ in range(MAX_ITER):
        grad = _nll_grad(beta, x1, t, lam)
        if np.max(np.abs(grad)) < GRAD_TOL:
            break
        gsq = float(grad @ grad)
        step = min(step * 2.0, 1e6)  # allow growth after conservative steps
        while step > 1e-18:
            cand = beta - step * grad
            cand_loss = _nll(cand, x1, t, lam)
            if cand_loss <= losses[-1] - 1e-4 * step * gsq:
                break
            step *= 0.5
        else:
            break
        beta = cand
        losses.append(cand_loss)
    return beta, losses


@dataclass(frozen=True)
class LogisticSelector:
    """One-vs-rest logistic classifier over standardized features."""

    classes: tuple[Label, ...]
    weights: np.ndarray  # (K, d + 1), bias last
    mean: np.ndarray
    scale: np.ndarray
    lam: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))
        object.__setattr__(self, "classes", tuple(self.classes))

    @classmethod
    def fit(cls, data: TrainingSet, lam: float = DEFAULT_LAMBDA) -> "LogisticSelector":
        classes = data.classes
        if len(classes) < 2:
            raise DegenerateLabelsError(
                f"need at least two classes, got {list(classes)}"
            )
        mean, scale = _standardize_params(data.features)
        xs = (data.features - mean) / scale
        x1 = np.hstack([xs, np.ones((len(data), 1))])
        labels = np.asarray(data.labels, dtype=object)
        weights = np.empty((len(classes), x1.shape[1]))
        for i, k in enumerate(classes):
            t = (labels == k).astype(float)
            weights[i], _ = _optimize_binary(x1, t, lam)
        return cls(classes, weights, mean, scale, lam)

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1

    def _lift(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.dim:
            raise ValueError(f"feature dimension {y.shape[0]} != {self.dim}")
        return np.append((y - self.mean) / self.scale, 1.0)

    def score_vector(self, y: np.ndarray) -> np.ndarray:
        return _sigmoid(self.weights @ self._lift(y))

    def scores(self, y: np.ndarray) -> dict[Label, float]:
        s = self.score_vector(y)
        return {k: float(s[i]) for i, k in enumerate(self.classes)}

    def logits(self, y: np.ndarray) -> np.ndarray:
        return self.weights @ self._lift(y)

    def confidence_vector(self, y: np.ndarray) -> np.ndarray:
        """Decision confidences: softmax over the one-vs-rest logits.

        The raw sigmoids measure each class against the rest independently; a
        class enclosed by the others can never raise its own sigmoid much
        even when it clearly wins the argmax. The softmax measures the gap
        between the winner and the rest, which is what a query threshold
        needs, and it preserves the argmax.
        """
        z = self.logits(y)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def confidences(self, y: np.ndarray) -> dict[Label, float]:
        c = self.confidence_vector(y)
        return {k: float(c[i]) for i, k in enumerate(self.classes)}

    def best(self, y: np.ndarray, bound: float = 0.0) -> Label | None:
        """Highest-scoring class above the bound; ties go to the lowest index."""
        s = self.score_vector(y)
        idx = int(np.argmax(s))
        if s[idx] > bound:
            return self.classes[idx]
        return None


def fit_ovr_logistic(data: TrainingSet, lam: float = DEFAULT_LAMBDA) -> LogisticSelector:
    return LogisticSelector.fit(data, lam)


def predict_ovr(selector: LogisticSelector, y: np.ndarray) -> dict[Label, float]:
    return selector.scores(y)


def add_point_and_refit(
    selector: LogisticSelector,
    data: TrainingSet,
    y: np.ndarray,
    label: Label,
) -> tuple[LogisticSelector, TrainingSet]:
    """Extend the training set by one point and refit from scratch."""
    extended = data.add(y, label)
    return LogisticSelector.fit(extended, selector.lam), extended


# ---------------------------------------------------------------------------
# Gaussian preconditions (prior-work baseline)
# ---------------------------------------------------------------------------

COV_FLOOR = 1e-6


def _floor_spd(cov: np.ndarray, floor: float) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T


@dataclass(frozen=True)
class GaussianPrecondition:
    """Per-class Gaussian over feature space, argmax log-density decision."""

    classes: tuple[Label, ...]
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d)

    @classmethod
    def fit(cls, data: TrainingSet) -> "GaussianPrecondition":
        classes = data.classes
        labels = np.asarray(data.labels, dtype=object)
        d = data.dim
        means = np.empty((len(classes), d))
        covs = np.empty((len(classes), d, d))
        for i, k in enumerate(classes):
            pts = data.features[labels == k]
            means[i] = pts.mean(axis=0)
            diff = pts - means[i]
            covs[i] = _floor_spd(diff.T @ diff / len(pts), COV_FLOOR)
        return cls(classes, means, covs)

    def log_densities(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.means.shape[1]:
            raise ValueError(
                f"feature dimension {y.shape[0]} != {self.means.shape[1]}"
            )
        out = np.empty(len(self.classes))
        d = y.shape[0]
        for i in range(len(self.classes)):
            diff = y - self.means[i]
            sign, logdet = np.linalg.slogdet(self.covariances[i])
            maha = diff @ np.linalg.solve(self.covariances[i], diff)
            out[i] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
        return out

    def predict(self, y: np.ndarray) -> Label:
        return self.classes[int(np.argmax(self.log_densities(y)))]

    def posteriors(self, y: np.ndarray) -> dict[Label, float]:
        """Equal-prior class posteriors (softmax of log-densities)."""
        logd = self.log_densities(y)
        logd -= logd.max()
        p = np.exp(logd)
        p /= p.sum()
        return {k: float(p[i]) for i, k in enumerate(self.classes)}


def fit_gaussian_precondition(data: TrainingSet) -> GaussianPrecondition:
    return GaussianPrecondition.fit(data)


def predict_gaussian_precondition(model: GaussianPrecondition, y: np.ndarray) -> Label:
    return model.predict(y)
