"""Pixelwise logistic classifier on sparse-map features and the label
preprocessing that feeds it."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .errors import DegenerateLabelsError, InvalidDimensionError, InvalidParameterError

UNLABELED = 0


class ConvergenceWarning(UserWarning):
    """Gradient descent stopped at its iteration cap."""


@dataclass
class ClassifierParams:
    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        self.b = float(self.b)
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise InvalidParameterError("classifier parameters must be finite")

    @classmethod
    def zeros(cls, k):
        return cls(np.zeros(k), 0.0)

    @property
    def vector(self):
        return np.append(self.w, self.b)

    @classmethod
    def from_vector(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1].copy(), float(theta[-1]))


@dataclass
class SampleSet:
    """Selected labeled pixels: flat canvas indices and their +-1 labels."""

    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.indices.shape != self.labels.shape:
            raise InvalidDimensionError("indices and labels differ in length")
        if len(np.unique(self.indices)) != len(self.indices):
            raise InvalidParameterError("sample indices must be unique")
        if np.any(np.abs(self.labels) != 1):
            raise InvalidParameterError("sample labels must be +1 or -1")

    def __len__(self):
        return len(self.indices)

    def features(self, z):
        """Per-sample feature rows ``z[:, d]`` from a (K, H, W) stack."""
        z = np.asarray(z)
        return z.reshape(z.shape[0], -1)[:, self.indices].T


def logistic_objective_grad(theta, features, labels, alpha):
    """Regularised logistic loss and its gradient.

    Parameters
    ----------
    theta : ClassifierParams
    features : ndarray, shape (n, K)
        One feature row per sample.
    labels : ndarray, shape (n,)
        Values in {-1, +1}.
    alpha : float
        Weight of ``||w||^2 + b^2``.

    Returns
    -------
    loss : float
    grad_w : ndarray, shape (K,)
    grad_b : float
    """
    features = np.asarray(features, dtype=float).reshape(len(labels), -1)
    labels = np.asarray(labels, dtype=float)
    margin = labels * (features @ theta.w + theta.b)
    loss = np.sum(np.logaddexp(0.0, -margin)) + alpha * (theta.w @ theta.w + theta.b**2)
    coef = -labels * expit(-margin)
    grad_w = features.T @ coef + 2.0 * alpha * theta.w
    grad_b = np.sum(coef) + 2.0 * alpha * theta.b
    return float(loss), grad_w, float(grad_b)


def train_logistic(features, labels, alpha=1.0, init=None, grad_tol=1e-6,
                   max_iter=20000, c_armijo=1e-4, shrink=0.5, step0=1.0):
    """Minimise the regularised logistic loss by backtracking gradient descent.

    Starts from ``init`` (zero when omitted). Iteration stops once the
    gradient max-norm falls below ``grad_tol``. If ``max_iter`` is reached
    the best iterate is returned and a :class:`ConvergenceWarning` is issued.
    """
    labels = np.asarray(labels, dtype=float)
    if len(labels) < 1:
        raise InvalidParameterError("need at least one sample")
    features = np.asarray(features, dtype=float).reshape(len(labels), -1)
    k = features.shape[1]
    theta = init if init is not None else ClassifierParams.zeros(k)
    x = theta.vector.copy()

    def evaluate(vec):
        loss, gw, gb = logistic_objective_grad(
            ClassifierParams.from_vector(vec), features, labels, alpha)
        return loss, np.append(gw, gb)

    f, g = evaluate(x)
    step = step0
    for _ in range(max_iter):
        if np.max(np.abs(g)) < grad_tol:
            return ClassifierParams.from_vector(x)
        gg = g @ g
        while True:
            cand = x - step * g
            fc, gc = evaluate(cand)
            if fc <= f - c_armijo * step * gg:
                break
            step *= shrink
            if step < 1e-300:
                return ClassifierParams.from_vector(x)
        x, f, g = cand, fc, gc
        # next line search starts from a doubled step
        step *= 2.0
    warnings.warn(f"logistic regression hit max_iter={max_iter} "
                  f"(|grad|_inf={np.max(np.abs(g)):.3g})", ConvergenceWarning)
    return ClassifierParams.from_vector(x)


def predict_scores(theta, z):
    """Per-pixel probability ``sigmoid(sum_k w_k z_k + b)``."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 3 or z.shape[0] != len(theta.w):
        raise InvalidDimensionError(
            f"map stack {z.shape} does not match {len(theta.w)} weights")
    return expit(np.tensordot(theta.w, z, axes=1) + theta.b)


def center_positives(raw):
    """Collapse each 4-connected +1 region to a single +1 at its centre.

    The centre is the member pixel nearest (Euclidean) to the region's
    centroid; ties go to the first member in row-major order. -1 pixels are
    kept; the remaining +1 pixels become unlabeled.
    """
    raw = np.asarray(raw)
    out = np.where(raw == -1, -1, UNLABELED).astype(raw.dtype)
    components, count = ndimage.label(raw == 1)
    for label in range(1, count + 1):
        rows, cols = np.nonzero(components == label)
        d2 = (rows - rows.mean()) ** 2 + (cols - cols.mean()) ** 2
        i = int(np.argmin(d2))
        out[rows[i], cols[i]] = 1
    return out


def sample_balanced(field, seed, cap=10000):
    """Draw ``min(cap, #pos, #neg)`` pixels of each class without replacement.

    ``field`` holds +1, -1 and 0 (unlabeled). Indices refer to the flattened
    field; the result is sorted by index.
    """
    field = np.asarray(field)
    flat = field.reshape(-1)
    pos = np.flatnonzero(flat == 1)
    neg = np.flatnonzero(flat == -1)
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateLabelsError(
            f"need both classes, got {len(pos)} positive / {len(neg)} negative pixels")
    n = min(int(cap), len(pos), len(neg))
    rng = np.random.default_rng(seed)
    chosen = np.concatenate([rng.choice(pos, n, replace=False),
                             rng.choice(neg, n, replace=False)])
    chosen.sort()
    return SampleSet(chosen, flat[chosen].astype(float))
