import numpy as np
import pytest

from skillcoord.selectors import (
    DegenerateLabelsError,
    GaussianPrecondition,
    LogisticSelector,
    TrainingSet,
    _nll,
    _nll_grad,
    _optimize_binary,
    add_point_and_refit,
    fit_gaussian_precondition,
    fit_ovr_logistic,
    predict_gaussian_precondition,
)

from oracles import central_difference_grad, logistic_oracle_weights


def two_class_1d():
    return TrainingSet(np.array([[-1.0], [1.0]]), ("A", "B"))


def clusters(rng, centers, n_per=6, spread=0.15):
    feats, labels = [], []
    for label, c in centers.items():
        pts = rng.normal(loc=c, scale=spread, size=(n_per, len(c)))
        feats.append(pts)
        labels += [label] * n_per
    return TrainingSet(np.vstack(feats), tuple(labels))


# -- training set bookkeeping -------------------------------------------------

def test_classes_ordered_by_first_appearance():
    data = TrainingSet(np.zeros((4, 2)), ("b", "a", "b", "c"))
    assert data.classes == ("b", "a", "c")


def test_add_extends_and_checks_dimension():
    data = two_class_1d()
    grown = data.add(np.array([0.5]), "B")
    assert len(grown) == 3 and len(data) == 2
    with pytest.raises(ValueError):
        data.add(np.array([1.0, 2.0]), "B")


# -- logistic fitting -----------------------------------------------------------

def test_two_point_fit_matches_convex_oracle():
    data = two_class_1d()
    sel = fit_ovr_logistic(data, lam=1e-3)
    targets = np.array([1.0, 0.0])  # class A indicator
    want = logistic_oracle_weights(data.features, targets, 1e-3)
    np.testing.assert_allclose(sel.weights[0], want, atol=1e-6)
    assert sel.scores(np.array([-1.0]))["A"] > 0.9


def test_zero_weights_give_half_scores():
    sel = fit_ovr_logistic(two_class_1d())
    flat = LogisticSelector(sel.classes, np.zeros_like(sel.weights), sel.mean, sel.scale, sel.lam)
    assert all(abs(v - 0.5) < 1e-12 for v in flat.scores(np.array([0.3])).values())


def test_duplicated_data_with_scaled_lambda_keeps_weights():
    rng = np.random.default_rng(21)
    data = clusters(rng, {"A": [-1.0, 0.0], "B": [1.0, 0.5]})
    doubled = TrainingSet(
        np.vstack([data.features, data.features]), data.labels + data.labels
    )
    sel1 = fit_ovr_logistic(data, lam=1e-3)
    sel2 = fit_ovr_logistic(doubled, lam=2e-3)
    np.testing.assert_allclose(sel1.weights, sel2.weights, atol=1e-6)


def test_separable_training_points_score_high():
    rng = np.random.default_rng(22)
    data = clusters(rng, {"A": [-2.0, 0.0], "B": [2.0, 0.0], "C": [0.0, 2.5]})
    sel = fit_ovr_logistic(data, lam=1e-4)
    for y, k in zip(data.features, data.labels):
        assert sel.scores(y)[k] > 0.9


def test_scores_stay_in_open_unit_interval():
    rng = np.random.default_rng(23)
    data = clusters(rng, {"A": [-1.0], "B": [1.0]})
    sel = fit_ovr_logistic(data)
    for y in rng.uniform(-5, 5, size=(50, 1)):
        for v in sel.scores(y).values():
            assert 0.0 < v < 1.0


def test_single_class_raises():
    with pytest.raises(DegenerateLabelsError):
        fit_ovr_logistic(TrainingSet(np.zeros((3, 1)), ("A", "A", "A")))


def test_zero_variance_dimension_is_clamped():
    feats = np.array([[1.0, 5.0], [-1.0, 5.0], [0.8, 5.0], [-0.9, 5.0]])
    data = TrainingSet(feats, ("B", "A", "B", "A"))
    sel = fit_ovr_logistic(data)
    assert sel.scale[1] == 1.0
    assert sel.best(np.array([1.0, 5.0])) == "B"


def test_dimension_mismatch_raises():
    sel = fit_ovr_logistic(two_class_1d())
    with pytest.raises(ValueError):
        sel.scores(np.array([1.0, 2.0]))


def test_fit_is_deterministic():
    rng = np.random.default_rng(24)
    data = clusters(rng, {"A": [-1.0, 1.0], "B": [1.0, -1.0]})
    w1 = fit_ovr_logistic(data, lam=1e-3).weights
    w2 = fit_ovr_logistic(data, lam=1e-3).weights
    assert w1.tobytes() == w2.tobytes()


def test_standardization_invariance_of_argmax():
    rng = np.random.default_rng(25)
    data = clusters(rng, {"A": [-1.0, 0.3], "B": [1.2, -0.5], "C": [0.0, 1.5]})
    sel = fit_ovr_logistic(data)
    scale = np.array([250.0, 0.004])
    shift = np.array([3.0, -7.0])
    rescaled = TrainingSet(data.features * scale + shift, data.labels)
    sel2 = fit_ovr_logistic(rescaled)
    for y in rng.normal(size=(40, 2)):
        assert sel.best(y) == sel2.best(y * scale + shift)


def test_loss_decreases_monotonically():
    rng = np.random.default_rng(26)
    data = clusters(rng, {"A": [-1.0, 0.0], "B": [0.6, 0.4]})
    mean, scale = data.features.mean(0), data.features.std(0)
    xs = (data.features - mean) / scale
    x1 = np.hstack([xs, np.ones((len(data), 1))])
    t = np.array([1.0 if k == "A" else 0.0 for k in data.labels])
    _, losses = _optimize_binary(x1, t, 1e-3)
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_analytic_gradient_matches_central_differences():
    rng = np.random.default_rng(27)
    for _ in range(100):
        n, d = rng.integers(4, 20), rng.integers(1, 8)
        x1 = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
        t = rng.integers(0, 2, size=n).astype(float)
        lam = 10.0 ** rng.uniform(-4, -1)
        beta = rng.normal(scale=0.8, size=d + 1)
        grad = _nll_grad(beta, x1, t, lam)
        want = central_difference_grad(lambda b: _nll(b, x1, t, lam), beta, step=1e-5)
        denom = max(np.linalg.norm(want), 1e-12)
        assert np.linalg.norm(grad - want) / denom < 1e-4


# -- incremental updates ------------------------------------------------------

def test_adding_existing_point_keeps_predictions():
    # duplicate one point of a large, saturated training set: the refit
    # optimum barely moves, so scores at the training points stay put
    rng = np.random.default_rng(28)
    data = clusters(rng, {"A": [-3.0, 0.0], "B": [3.0, 0.0]}, n_per=40, spread=0.05)
    sel = fit_ovr_logistic(data, lam=1e-6)
    probes = data.features
    before = np.array([sel.score_vector(y) for y in probes])
    sel2, data2 = add_point_and_refit(sel, data, data.features[0], data.labels[0])
    after = np.array([sel2.score_vector(y) for y in probes])
    assert len(data2) == len(data) + 1
    assert np.max(np.abs(after - before)) < 1e-6


def test_new_class_becomes_predictable():
    rng = np.random.default_rng(29)
    data = clusters(rng, {"A": [-2.0, 0.0], "B": [2.0, 0.0]}, n_per=4)
    sel = fit_ovr_logistic(data, lam=1e-4)
    point = np.array([0.0, 3.0])
    sel2, data2 = add_point_and_refit(sel, data, point, "C")
    assert sel2.classes == ("A", "B", "C")
    assert sel2.scores(point)["C"] > 0.8
    assert sel2.best(point) == "C"


def test_queried_point_classified_to_its_label_after_update():
    rng = np.random.default_rng(30)
    data = clusters(rng, {"A": [-1.0, 0.0], "B": [1.0, 0.0]}, n_per=3)
    sel = fit_ovr_logistic(data)
    point = np.array([0.4, 1.0])
    sel2, _ = add_point_and_refit(sel, data, point, "A")
    assert sel2.best(point) == "A"


# -- Gaussian preconditions ------------------------------------------------------

def test_single_point_classes_use_floor_covariance():
    data = TrainingSet(np.array([[0.0, 0.0], [1.0, 1.0]]), ("A", "B"))
    model = fit_gaussian_precondition(data)
    np.testing.assert_allclose(model.means[0], [0.0, 0.0])
    np.testing.assert_allclose(model.covariances[0], 1e-6 * np.eye(2), atol=1e-12)


def test_well_separated_clusters_classify_their_points():
    rng = np.random.default_rng(31)
    data = clusters(rng, {"A": [-3.0, 0.0], "B": [3.0, 0.0]})
    model = fit_gaussian_precondition(data)
    for y, k in zip(data.features, data.labels):
        assert predict_gaussian_precondition(model, y) == k


def test_means_invariant_under_permutation():
    rng = np.random.default_rng(32)
    data = clusters(rng, {"A": [-1.0], "B": [1.0]})
    perm = rng.permutation(len(data))
    shuffled = TrainingSet(data.features[perm], tuple(data.labels[i] for i in perm))
    m1 = fit_gaussian_precondition(data)
    m2 = fit_gaussian_precondition(shuffled)
    for k in ("A", "B"):
        i1, i2 = m1.classes.index(k), m2.classes.index(k)
        np.testing.assert_allclose(m1.means[i1], m2.means[i2], atol=1e-12)


def test_gaussian_tie_breaks_to_lowest_class_index():
    data = TrainingSet(np.array([[-1.0], [1.0]]), ("B", "A"))
    model = fit_gaussian_precondition(data)
    # exactly equidistant from both isotropic classes
    assert predict_gaussian_precondition(model, np.array([0.0])) == "B"


def test_gaussian_mean_is_predicted_when_far_apart():
    rng = np.random.default_rng(33)
    data = clusters(rng, {"A": [-5.0, 2.0], "B": [5.0, -2.0]})
    model = fit_gaussian_precondition(data)
    idx = model.classes.index("A")
    assert predict_gaussian_precondition(model, model.means[idx]) == "A"
