
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scsc import classifier as clf
from scsc.classifier import ClassifierParams, SampleSet
from scsc.errors import DegenerateLabelsError, InvalidDimensionError, InvalidParameterError

from oracles import bisect_root, logistic_newton, nearest_member


def _problem(rng, n=30, k=3):
    feats = rng.normal(size=(n, k))
    labels = rng.choice([-1.0, 1.0], size=n)
    return feats, labels


def test_objective_at_zero():
    feats = np.zeros((4, 2))
    loss, gw, gb = clf.logistic_objective_grad(ClassifierParams.zeros(2), feats,
                                               np.array([1, -1, 1, 1.0]), 1.0)
    assert loss == pytest.approx(4 * np.log(2))
    assert np.allclose(gw, 0)
    assert gb == pytest.approx(-1.0)


def test_gradient_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(50):
        feats, labels = _problem(rng, n=int(rng.integers(1, 20)), k=int(rng.integers(1, 5)))
        alpha = float(rng.uniform(0, 3))
        theta = rng.normal(size=feats.shape[1] + 1)
        _, gw, gb = clf.logistic_objective_grad(ClassifierParams.from_vector(theta),
                                                feats, labels, alpha)
        grad = np.append(gw, gb)
        fd = np.empty_like(theta)
        for i in range(len(theta)):
            e = np.zeros_like(theta)
            e[i] = h
            fp = clf.logistic_objective_grad(ClassifierParams.from_vector(theta + e), feats, labels, alpha)[0]
            fm = clf.logistic_objective_grad(ClassifierParams.from_vector(theta - e), feats, labels, alpha)[0]
            fd[i] = (fp - fm) / (2 * h)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 1))
def test_objective_is_convex_along_segments(seed, t):
    rng = np.random.default_rng(seed)
    feats, labels = _problem(rng, n=10, k=2)
    a, b = rng.normal(size=3) * 3, rng.normal(size=3) * 3
    f = lambda v: clf.logistic_objective_grad(ClassifierParams.from_vector(v), feats, labels, 0.5)[0]
    assert f(t * a + (1 - t) * b) <= t * f(a) + (1 - t) * f(b) + 1e-9


def test_train_one_dimensional_against_bisection():
    # one feature and b fixed by symmetry: labels +-1 at features +-1
    feats = np.array([[1.0], [-1.0]])
    labels = np.array([1.0, -1.0])
    theta = clf.train_logistic(feats, labels, alpha=0.5, grad_tol=1e-9)
    assert theta.b == pytest.approx(0.0, abs=1e-8)
    # stationarity in w: -2 sigmoid(-w) + 2 alpha w = 0
    ref = bisect_root(lambda w: -2.0 / (1.0 + np.exp(w)) + 1.0 * w, -10, 10)
    assert theta.w[0] == pytest.approx(ref, abs=1e-8)


def test_train_matches_newton_oracle(rng):
    for alpha in (0.01, 1.0, 10.0):
        feats, labels = _problem(rng)
        theta = clf.train_logistic(feats, labels, alpha=alpha, grad_tol=1e-7)
        ref = logistic_newton(feats, labels, alpha)
        assert np.abs(theta.vector - ref).max() < 1e-5


def test_train_optimality_under_random_probes(rng):
    feats, labels = _problem(rng)
    theta = clf.train_logistic(feats, labels, alpha=0.3, grad_tol=1e-7)
    f = lambda v: clf.logistic_objective_grad(ClassifierParams.from_vector(v), feats, labels, 0.3)[0]
    base = f(theta.vector)
    for _ in range(500):
        assert f(theta.vector + rng.uniform(-1e-3, 1e-3, size=4)) >= base - 1e-10


def test_train_warm_start_and_cap_warning(rng):
    feats, labels = _problem(rng)
    theta = clf.train_logistic(feats, labels, alpha=1.0, grad_tol=1e-7)
    again = clf.train_logistic(feats, labels, alpha=1.0, init=theta, grad_tol=1e-7, max_iter=1)
    assert np.allclose(again.vector, theta.vector)
    with pytest.warns(clf.ConvergenceWarning):
        clf.train_logistic(feats, labels, alpha=1e-4, grad_tol=1e-14, max_iter=3)


def test_train_needs_samples():
    with pytest.raises(InvalidParameterError):
        clf.train_logistic(np.zeros((0, 2)), np.zeros(0))


def test_predict_scores(rng):
    z = rng.normal(size=(2, 3, 4))
    theta = ClassifierParams(np.array([0.5, -1.0]), 0.2)
    expected = 1.0 / (1.0 + np.exp(-(0.5 * z[0] - z[1] + 0.2)))
    assert np.allclose(clf.predict_scores(theta, z), expected)
    assert clf.predict_scores(ClassifierParams.zeros(2), z).max() == 0.5
    with pytest.raises(InvalidDimensionError):
        clf.predict_scores(theta, z[:1])


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        ClassifierParams(np.array([np.nan]), 0.0)
    p = ClassifierParams.from_vector([1.0, 2.0, 3.0])
    assert np.array_equal(p.w, [1.0, 2.0]) and p.b == 3.0


def test_sample_set_validation(rng):
    with pytest.raises(InvalidParameterError):
        SampleSet([1, 1], [1, -1])
    with pytest.raises(InvalidParameterError):
        SampleSet([1, 2], [1, 0])
    with pytest.raises(InvalidDimensionError):
        SampleSet([1, 2], [1])
    z = rng.normal(size=(3, 4, 5))
    s = SampleSet([0, 7], [1, -1])
    assert np.array_equal(s.features(z), np.stack([z[:, 0, 0], z[:, 1, 2]]))


def _components(mask):
    """Flood-fill 4-connected components of a boolean grid."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                stack, comp = [(r, c)], []
                seen[r, c] = True
                while stack:
                    p = stack.pop()
                    comp.append(p)
                    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        q = (p[0] + dr, p[1] + dc)
                        if 0 <= q[0] < h and 0 <= q[1] < w and mask[q] and not seen[q]:
                            seen[q] = True
                            stack.append(q)
                comps.append(comp)
    return comps


def _center_oracle(raw):
    out = np.where(raw == -1, -1, 0)
    for comp in _components(raw == 1):
        out[nearest_member(comp)] = 1
    return out


def test_center_positives_l_shape():
    raw = np.zeros((5, 5), dtype=int)
    raw[0:4, 0] = 1
    raw[3, 1:4] = 1
    raw[4, 4] = -1
    out = clf.center_positives(raw)
    assert (out == 1).sum() == 1
    assert np.array_equal(out, _center_oracle(raw))
    assert out[4, 4] == -1


def test_center_positives_diagonal_is_two_regions():
    raw = np.array([[1, 0], [0, 1]])
    assert np.array_equal(clf.center_positives(raw), raw)


def test_center_positives_random_against_flood_fill(rng):
    for _ in range(100):
        raw = rng.choice([-1, 0, 1], size=(9, 11), p=[0.3, 0.3, 0.4])
        assert np.array_equal(clf.center_positives(raw), _center_oracle(raw))


def test_sample_balanced_counts_and_determinism(rng):
    field = rng.choice([-1, 0, 1], size=(20, 20), p=[0.6, 0.2, 0.2])
    npos, nneg = (field == 1).sum(), (field == -1).sum()
    s = clf.sample_balanced(field, seed=3)
    assert len(s) == 2 * min(npos, nneg)
    assert (s.labels == 1).sum() == (s.labels == -1).sum()
    assert np.all(field.reshape(-1)[s.indices] == s.labels)
    assert np.all(np.diff(s.indices) > 0)
    s2 = clf.sample_balanced(field, seed=3)
    assert np.array_equal(s.indices, s2.indices)
    capped = clf.sample_balanced(field, seed=3, cap=5)
    assert len(capped) == 10


def test_sample_balanced_uniform_over_seeds():
    field = np.array([1] * 10 + [-1] * 4)
    counts = np.zeros(10)
    n_seeds = 1000
    for seed in range(n_seeds):
        s = clf.sample_balanced(field, seed=seed, cap=3)
        counts[s.indices[s.labels == 1]] += 1
    p = 0.3
    sigma = np.sqrt(n_seeds * p * (1 - p))
    assert np.all(np.abs(counts - n_seeds * p) < 3 * sigma)


def test_sample_balanced_degenerate():
    with pytest.raises(DegenerateLabelsError):
        clf.sample_balanced(np.array([1, 1, 0]), seed=0)
    with pytest.raises(DegenerateLabelsError):
        clf.sample_balanced(np.array([-1, 0]), seed=0)
