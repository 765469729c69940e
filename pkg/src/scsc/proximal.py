"""Proximal operators of the four terms split apart by the ADMM solvers.

All operators compute ``argmin_v f(v) + (rho/2) ||v - q||^2`` (or the
equivalent threshold form) and act elementwise, so callers may pass arrays
of any shape.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidDimensionError, InvalidParameterError, NumericalError


@dataclass(frozen=True)
class ProxConfig:
    rho: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidParameterError(f"rho must be positive, got {self.rho}")
        if not self.newton_tol > 0:
            raise InvalidParameterError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise InvalidParameterError("newton_max_iter must be >= 1")


def prox_l1(q, tau):
    """Soft thresholding, the prox of ``tau * ||.||_1``."""
    if tau < 0:
        raise InvalidParameterError(f"threshold must be non-negative, got {tau}")
    q = np.asarray(q, dtype=float)
    return np.sign(q) * np.maximum(np.abs(q) - tau, 0.0)


def prox_data(q, x, mask, rho):
    """Prox of ``1/2 ||x - M v||^2`` with a binary per-pixel gate ``M``.

    Observed pixels are pulled toward the data, ``(x + rho q) / (1 + rho)``;
    pixels with ``mask == 0`` pass through unchanged.
    """
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=float)
    if not (q.shape == x.shape == mask.shape):
        raise InvalidDimensionError(
            f"shape mismatch: q {q.shape}, x {x.shape}, mask {mask.shape}")
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    if np.any((mask != 0) & (mask != 1)):
        raise InvalidParameterError("mask must be binary")
    return np.where(mask == 1, (x + rho * q) / (1.0 + rho), q)


def prox_unitball(q, m):
    """Project canvas-sized filters onto ``{v : support in m x m, ||v|| <= 1}``.

    ``q`` is a single canvas or a stack ``(K, H, W)``; each canvas is
    projected independently.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim < 2 or m < 1 or m > min(q.shape[-2:]):
        raise InvalidDimensionError(f"support {m} invalid for shape {q.shape}")
    out = np.zeros_like(q)
    block = q[..., :m, :m]
    norms = np.sqrt(np.sum(block * block, axis=(-2, -1), keepdims=True))
    scale = np.where(norms > 1.0, 1.0 / np.where(norms > 1.0, norms, 1.0), 1.0)
    out[..., :m, :m] = block * scale
    return out


def logistic_loss(t):
    """``log(1 + exp(-t))`` without overflow."""
    return np.logaddexp(0.0, -np.asarray(t, dtype=float))


def prox_logistic(q, y, b, gamma, rho, cfg=None):
    """Prox of ``gamma * log(1 + exp(-y (v + b)))`` with weight ``rho``.

    Solves the scalar stationarity condition
    ``-gamma y sigmoid(-y (v + b)) + rho (v - q) = 0`` per entry by Newton's
    method, safeguarded by a bracket grown by doubling from ``q``; entries
    whose Newton step leaves the bracket, or which have not converged within
    ``cfg.newton_max_iter`` steps, are finished by bisection.
    """
    cfg = cfg or ProxConfig(rho=rho)
    if gamma < 0:
        raise InvalidParameterError(f"gamma must be non-negative, got {gamma}")
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    q = np.asarray(q, dtype=float)
    y = np.broadcast_to(np.asarray(y, dtype=float), q.shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), q.shape)
    if gamma == 0 or q.size == 0:
        return q.copy()

    def grad(v):
        return -gamma * y * expit(-y * (v + b)) + rho * (v - q)

    def hess(v):
        s = expit(-y * (v + b))
        return rho + gamma * s * (1.0 - s)

    # Root lies on the side of q indicated by -grad(q), i.e. toward +y.
    lo = q.copy()
    hi = q.copy()
    width = np.ones_like(q)
    direction = np.where(y > 0, 1.0, -1.0)
    open_ = np.ones(q.shape, dtype=bool)
    for _ in range(2100):
        if not open_.any():
            break
        probe = q + direction * width
        g = grad(probe)
        closed = open_ & (direction * g >= 0)
        lo = np.where(closed & (direction < 0), probe, lo)
        hi = np.where(closed & (direction > 0), probe, hi)
        open_ &= ~closed
        width = np.where(open_, 2.0 * width, width)
        if not np.all(np.isfinite(width)):
            break
    if open_.any():
        raise NumericalError("could not bracket the logistic prox root")

    v = q.copy()
    done = np.abs(grad(v)) < cfg.newton_tol
    bisect = np.zeros(q.shape, dtype=bool)
    for _ in range(cfg.newton_max_iter):
        if done.all():
            break
        g = grad(v)
        lo = np.where(g < 0, np.maximum(lo, v), lo)
        hi = np.where(g > 0, np.minimum(hi, v), hi)
        step = v - g / hess(v)
        escaped = (step < lo) | (step > hi) | ~np.isfinite(step)
        bisect |= escaped & ~done
        v = np.where(done | bisect, v, step)
        done |= np.abs(grad(v)) < cfg.newton_tol
    bisect |= ~done

    if bisect.any():
        idx = np.nonzero(bisect)
        a, c = lo[idx], hi[idx]
        yi, bi, qi = y[idx], b[idx], q[idx]
        mid = 0.5 * (a + c)
        for _ in range(2200):
            mid = 0.5 * (a + c)
            gm = -gamma * yi * expit(-yi * (mid + bi)) + rho * (mid - qi)
            settled = (np.abs(gm) < cfg.newton_tol) | (c - a <= 4 * np.spacing(np.abs(mid) + 1))
            if settled.all():
                break
            a = np.where(settled | (gm > 0), a, mid)
            c = np.where(settled | (gm < 0), c, mid)
        v[idx] = mid
    if not np.all(np.isfinite(v)):
        raise NumericalError("non-finite logistic prox result")
    return v
