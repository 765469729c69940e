"""Scaled ADMM for the convolutional coding and dictionary-learning
subproblems.

Each subproblem is written as ``sum_i f_i(K_i y)`` with a stacked operator
``K``. One iteration solves the quadratic y-update in the Fourier domain,
applies each block's proximal operator and takes a dual step.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import proximal
from .errors import InvalidDimensionError, InvalidParameterError, NumericalError
from .spectral import bank_spectra, pad_filter


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0
    max_iter: int = 100
    tol: float = 1e-4
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    exact_fourier_solve: bool = False
    cg_tol: float = 1e-12
    cg_max_iter: int = 1000
    track_best: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidParameterError("rho must be positive")
        if not self.tol > 0:
            raise InvalidParameterError("tol must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")

    @property
    def prox(self):
        return proximal.ProxConfig(self.rho, self.newton_tol, self.newton_max_iter)


# -- stacked operator blocks ------------------------------------------------

class ConvBlock:
    """``y -> sum_k h_k * y_k`` for a stack of canvas-sized kernels.

    Used as the dictionary block (kernels are filters, ``y`` are maps) and,
    with roles exchanged, as the sparse-maps block of dictionary learning.
    """

    def __init__(self, spectra, shape, kind="dictionary"):
        self.spectra = spectra
        self.shape = tuple(shape)
        self.kind = kind

    def apply_hat(self, yhat):
        return np.fft.irfft2(np.sum(self.spectra * yhat, axis=0), s=self.shape)

    def adjoint_hat(self, t):
        return np.conj(self.spectra) * np.fft.rfft2(t)[None]


class IdentityBlock:
    kind = "identity"


class ClassifierRowsBlock:
    """``y -> (sum_k w_k y_k[d])`` over the sampled canvas pixels ``d``."""

    kind = "classifier"

    def __init__(self, w, indices, shape):
        self.w = np.asarray(w, dtype=float)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.shape = tuple(shape)

    def apply(self, y):
        flat = y.reshape(y.shape[0], -1)
        return self.w @ flat[:, self.indices]

    def adjoint(self, s):
        out = np.zeros((len(self.w), self.shape[0] * self.shape[1]))
        out[:, self.indices] = np.outer(self.w, s)
        return out.reshape((len(self.w),) + self.shape)


def woodbury_block_inverse(dhat, w):
    """Inverse of ``dhat dhat^H + w w^T + I`` via the Woodbury identity.

    ``dhat`` has shape ``(..., K)`` (one vector per frequency bin), ``w``
    shape ``(K,)``. The inverse of ``w w^T + I`` is formed once
    (Sherman-Morrison) and shared by every bin.
    """
    dhat = np.asarray(dhat, dtype=complex)
    w = np.asarray(w, dtype=float)
    k = w.shape[0]
    if dhat.shape[-1] != k:
        raise InvalidDimensionError("dhat and w disagree on K")
    w_inv = np.eye(k) - np.outer(w, w) / (1.0 + w @ w)
    a = dhat @ w_inv                      # (W~^-1 d) as a row; W~^-1 is real symmetric
    denom = 1.0 + np.real(np.sum(np.conj(dhat) * a, axis=-1))
    return w_inv - a[..., :, None] * np.conj(a)[..., None, :] / denom[..., None, None]


def _woodbury_apply(v, w, r):
    """``(I + w w^T + v v^H)^{-1} r`` per bin without forming matrices.

    ``v`` and ``r`` are (K, B) arrays, one column per frequency bin.
    """
    scale = 1.0 / (1.0 + w @ w)
    wr = w @ r
    winv_r = r - np.outer(w, wr) * scale
    a = v - np.outer(w, w @ v) * scale
    denom = 1.0 + np.real(np.sum(np.conj(v) * a, axis=0))
    return winv_r - a * (np.sum(np.conj(a) * r, axis=0) / denom)


class StackedOperator:
    """Vertical stack of blocks applied to a (K, H, W) primal variable."""

    def __init__(self, blocks, n_maps, shape, cfg=None):
        self.blocks = list(blocks)
        self.n_maps = n_maps
        self.shape = tuple(shape)
        self.cfg = cfg or AdmmConfig()
        conv = [b for b in self.blocks if isinstance(b, ConvBlock)]
        ident = [b for b in self.blocks if isinstance(b, IdentityBlock)]
        cls = [b for b in self.blocks if isinstance(b, ClassifierRowsBlock)]
        if len(ident) != 1:
            raise InvalidDimensionError("operator needs exactly one identity block")
        if len(cls) > 1 or (cls and len(conv) != 1):
            raise InvalidDimensionError(
                "a classifier block requires exactly one dictionary block")
        self._conv = conv
        self._cls = cls[0] if cls else None
        self._prepare()

    def _prepare(self):
        k = self.n_maps
        if not self._conv:
            self._mode = "identity"
            return
        # V[n] = conj(h_n); normal matrix per bin is I + sum_n V_n V_n^H (+ W^T W)
        v = np.conj(np.stack([b.spectra for b in self._conv]))   # (N, K, H, Wh)
        self._bins = v.shape[2:]
        v = v.reshape(v.shape[0], k, -1)
        self._v = v
        if self._cls is not None:
            w = self._cls.w
            all_labeled = len(self._cls.indices) == self.shape[0] * self.shape[1]
            if not np.any(w):
                self._mode = "single"
            elif self.cfg.exact_fourier_solve and all_labeled:
                mats = woodbury_block_inverse(v[0].T, w)   # (B, K, K)
                self._mode = "dense"
                self._inv = mats
            else:
                self._mode = "cg"
            return
        n = v.shape[0]
        if n == 1:
            self._mode = "single"
        elif n <= k:
            # Woodbury with an n x n capacitance matrix per bin
            cap = np.einsum("nkb,mkb->bnm", np.conj(v), v) + np.eye(n)
            self._cap_inv = np.linalg.inv(cap)
            self._mode = "low_rank"
        else:
            normal = np.einsum("nkb,njb->bkj", v, np.conj(v)) + np.eye(k)
            self._inv = np.linalg.inv(normal)
            self._mode = "dense"

    # -- forward ---------------------------------------------------------
    def apply(self, y):
        yhat = np.fft.rfft2(y) if self._conv else None
        out = []
        for block in self.blocks:
            if isinstance(block, ConvBlock):
                out.append(block.apply_hat(yhat))
            elif isinstance(block, IdentityBlock):
                out.append(y)
            else:
                out.append(block.apply(y))
        return out

    def normal_apply(self, y):
        """``K^T K y``."""
        out = np.array(y, dtype=float, copy=True)
        if self._conv:
            yhat = np.fft.rfft2(y)
            acc = 0
            for block in self._conv:
                acc = acc + np.conj(block.spectra) * np.sum(block.spectra * yhat, axis=0)
            out += np.fft.irfft2(acc, s=self.shape)
        if self._cls is not None:
            out += self._cls.adjoint(self._cls.apply(y))
        return out

    # -- y-update ----------------------------------------------------------
    def _inverse_hat(self, rhat):
        """Apply the per-bin inverse of ``I + sum V V^H`` (+ w w^T) to spectra."""
        k = self.n_maps
        r = rhat.reshape(k, -1)
        mode = self._mode
        if mode == "single" or mode == "cg":
            v = self._v[0]
            if mode == "cg":
                x = _woodbury_apply(v, self._cls.w, r)
            else:
                x = r - v * (np.sum(np.conj(v) * r, axis=0) / (1.0 + np.sum(np.abs(v) ** 2, axis=0)))
        elif mode == "low_rank":
            vh_r = np.einsum("nkb,kb->bn", np.conj(self._v), r)
            c = np.einsum("bnm,bm->bn", self._cap_inv, vh_r)
            x = r - np.einsum("nkb,bn->kb", self._v, c)
        else:
            x = np.einsum("bkj,jb->kb", self._inv, r)
        return x.reshape(rhat.shape)

    def solve(self, targets):
        """Exact minimiser of ``sum_i ||K_i y - targets[i]||^2``."""
        rhs = np.zeros((self.n_maps,) + self.shape)
        rhs_hat = 0
        for block, t in zip(self.blocks, targets):
            if isinstance(block, ConvBlock):
                rhs_hat = rhs_hat + block.adjoint_hat(t)
            elif isinstance(block, IdentityBlock):
                rhs += t
            else:
                rhs += block.adjoint(t)
        if self._mode == "identity":
            return rhs
        rhs_hat = rhs_hat + np.fft.rfft2(rhs)
        y = np.fft.irfft2(self._inverse_hat(rhs_hat), s=self.shape)
        if self._mode != "cg":
            return y
        return self._cg(np.fft.irfft2(rhs_hat, s=self.shape), y)

    def _cg(self, rhs, x0):
        n = rhs.size
        full = (self.n_maps,) + self.shape

        def matvec(vec):
            return self.normal_apply(vec.reshape(full)).ravel()

        def precond(vec):
            vhat = np.fft.rfft2(vec.reshape(full))
            return np.fft.irfft2(self._inverse_hat(vhat), s=self.shape).ravel()

        a_op = LinearOperator((n, n), matvec=matvec, dtype=float)
        m_op = LinearOperator((n, n), matvec=precond, dtype=float)
        sol, info = cg(a_op, rhs.ravel(), x0=x0.ravel(), rtol=self.cfg.cg_tol,
                       atol=0.0, maxiter=self.cfg.cg_max_iter, M=m_op)
        if info < 0 or not np.all(np.isfinite(sol)):
            raise NumericalError("conjugate gradient broke down in the y-update")
        return sol.reshape(full)


def solve_y_fourier(op, targets):
    """Least-squares y-update ``argmin ||K y - (u - lambda)||^2``."""
    return op.solve(targets)


# -- generic loop -------------------------------------------------------------

@dataclass
class AdmmState:
    y: np.ndarray
    u: List[np.ndarray]
    lam: List[np.ndarray]
    iter: int = 0

    @classmethod
    def start(cls, op, y0):
        u = [np.array(v, copy=True) for v in op.apply(y0)]
        return cls(np.array(y0, dtype=float, copy=True), u, [np.zeros_like(v) for v in u])

    def compatible(self, op):
        shapes = [np.shape(v) for v in op.apply(self.y)]
        return len(shapes) == len(self.u) and all(
            s == np.shape(u) for s, u in zip(shapes, self.u))


@dataclass
class AdmmReport:
    iterations: int = 0
    primal_residual: List[float] = field(default_factory=list)
    dual_residual: List[float] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    converged: bool = False
    best_iteration: int = 0
    state: Optional[AdmmState] = field(default=None, repr=False)


def _norm(blocks):
    return float(np.sqrt(sum(float(np.vdot(b, b).real) for b in blocks)))


def admm_solve(op, proxes, state, rho, max_iter, tol,
               objective: Optional[Callable] = None,
               candidate: Optional[Callable] = None):
    """Run scaled ADMM from ``state`` (advanced in place).

    Parameters
    ----------
    op : StackedOperator
    proxes : list of callables
        ``proxes[i](v)`` returns ``prox_{f_i / rho}(v)``; aligned with
        ``op.blocks``.
    state : AdmmState
    objective, candidate : callables, optional
        When given, ``candidate(state)`` extracts a point from the iterate
        and ``objective(point)`` scores it; the best point seen, including
        the starting one, is returned. Otherwise ``state.y`` is returned.

    Returns
    -------
    solution : ndarray
    report : AdmmReport
    """
    if len(proxes) != len(op.blocks):
        raise InvalidDimensionError("one prox per operator block is required")
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    report = AdmmReport(state=state)
    best = best_f = None
    if objective is not None:
        best = candidate(state)
        best_f = objective(best)
        report.objective.append(best_f)
    for it in range(1, max_iter + 1):
        targets = [u - lam for u, lam in zip(state.u, state.lam)]
        y = op.solve(targets)
        ky = op.apply(y)
        u_new = [prox(k + lam) for prox, k, lam in zip(proxes, ky, state.lam)]
        lam_new = [lam + k - u for lam, k, u in zip(state.lam, ky, u_new)]
        if not all(np.all(np.isfinite(a)) for a in (y, *u_new, *lam_new)):
            raise NumericalError(f"ADMM diverged at iteration {it}")
        r = _norm([k - u for k, u in zip(ky, u_new)])
        primal = r / max(_norm(ky), _norm(u_new), 1.0)
        dual = rho * _norm([a - b for a, b in zip(u_new, state.u)]) / max(_norm(lam_new), 1.0)
        state.y, state.u, state.lam = y, u_new, lam_new
        state.iter += 1
        report.iterations = it
        report.primal_residual.append(primal)
        report.dual_residual.append(dual)
        if objective is not None:
            point = candidate(state)
            f = objective(point)
            report.objective.append(f)
            if f <= best_f:
                best, best_f = point, f
                report.best_iteration = it
        if max(primal, dual) < tol:
            report.converged = True
            break
    if objective is None:
        return state.y, report
    return best, report


# -- subproblems ----------------------------------------------------------------

def data_residual(x, mask, recon):
    return mask * (x - recon)


def coding_objective(x, mask, spectra, z, beta, theta=None, samples=None, gamma=0.0):
    """``1/2 ||x - M D z||^2 + beta ||z||_1 [+ gamma * logistic loss]``."""
    shape = x.shape
    recon = np.fft.irfft2(np.sum(spectra * np.fft.rfft2(z), axis=0), s=shape)
    res = mask * (x - recon)
    f = 0.5 * float(np.sum(res * res)) + beta * float(np.sum(np.abs(z)))
    if gamma and samples is not None and len(samples):
        scores = samples.features(z) @ theta.w + theta.b
        f += gamma * float(np.sum(proximal.logistic_loss(samples.labels * scores)))
    return f


def _check_canvas(x, mask, bank):
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=float)
    if x.ndim != 2 or x.shape != mask.shape:
        raise InvalidDimensionError("x and mask must be equally sized 2-D canvases")
    bank = np.asarray(bank, dtype=float)
    if bank.ndim != 3 or bank.shape[1] != bank.shape[2]:
        raise InvalidDimensionError("bank must have shape (K, m, m)")
    if bank.shape[1] > min(x.shape):
        raise InvalidDimensionError("filter larger than canvas")
    return x, mask, bank


def solve_coding(x, mask, bank, beta, cfg=None, z0=None, state=None):
    """Sparse maps for a fixed dictionary (unsupervised coding).

    ``x`` and ``mask`` are canvas-sized. Returns ``(z, report)``; the ADMM
    state is advanced in place and also available as ``report.state`` for
    warm-starting the next call.
    """
    cfg = cfg or AdmmConfig()
    x, mask, bank = _check_canvas(x, mask, bank)
    if beta < 0:
        raise InvalidParameterError("beta must be non-negative")
    k = bank.shape[0]
    spectra = bank_spectra(bank, x.shape)
    op = StackedOperator([ConvBlock(spectra, x.shape), IdentityBlock()], k, x.shape, cfg)
    z0 = np.zeros((k,) + x.shape) if z0 is None else np.asarray(z0, dtype=float)
    if state is None or not state.compatible(op):
        state = AdmmState.start(op, z0)
    rho = cfg.rho
    proxes = [lambda v: proximal.prox_data(v, x, mask, rho),
              lambda v: proximal.prox_l1(v, beta / rho)]
    objective = candidate = None
    if cfg.track_best:
        objective = lambda z: coding_objective(x, mask, spectra, z, beta)
        candidate = _identity_candidate(op, z0)
    return admm_solve(op, proxes, state, rho, cfg.max_iter, cfg.tol,
                      objective, candidate)


def _identity_candidate(op, start):
    """Candidate extractor: the start point first, then the identity-block ``u``."""
    slot = next(i for i, b in enumerate(op.blocks) if isinstance(b, IdentityBlock))
    first = [True]

    def pick(state):
        if first[0]:
            first[0] = False
            return np.array(start, copy=True)
        return state.u[slot]

    return pick


def solve_coding_supervised(x, mask, bank, theta, samples, beta, gamma, cfg=None,
                            z0=None, state=None):
    """Sparse maps for a fixed dictionary and classifier.

    ``samples`` holds flat canvas indices. With ``gamma == 0`` (or no
    samples) the classification block vanishes and this is exactly
    :func:`solve_coding`.
    """
    if gamma < 0:
        raise InvalidParameterError("gamma must be non-negative")
    if gamma == 0 or samples is None or len(samples) == 0:
        return solve_coding(x, mask, bank, beta, cfg, z0, state)
    cfg = cfg or AdmmConfig()
    x, mask, bank = _check_canvas(x, mask, bank)
    k = bank.shape[0]
    if len(theta.w) != k:
        raise InvalidDimensionError("classifier weight count differs from K")
    spectra = bank_spectra(bank, x.shape)
    blocks = [ConvBlock(spectra, x.shape), IdentityBlock(),
              ClassifierRowsBlock(theta.w, samples.indices, x.shape)]
    op = StackedOperator(blocks, k, x.shape, cfg)
    z0 = np.zeros((k,) + x.shape) if z0 is None else np.asarray(z0, dtype=float)
    if state is None or not state.compatible(op):
        state = AdmmState.start(op, z0)
    rho = cfg.rho
    pcfg = cfg.prox
    labels = samples.labels
    proxes = [lambda v: proximal.prox_data(v, x, mask, rho),
              lambda v: proximal.prox_l1(v, beta / rho),
              lambda v: proximal.prox_logistic(v, labels, theta.b, gamma, rho, pcfg)]
    objective = candidate = None
    if cfg.track_best:
        objective = lambda z: coding_objective(x, mask, spectra, z, beta, theta, samples, gamma)
        candidate = _identity_candidate(op, z0)
    return admm_solve(op, proxes, state, rho, cfg.max_iter, cfg.tol,
                      objective, candidate)


def learning_objective(images, masks, z_spectra, d_canvas):
    dhat = np.fft.rfft2(d_canvas)
    total = 0.0
    for x, mask, zhat in zip(images, masks, z_spectra):
        recon = np.fft.irfft2(np.sum(zhat * dhat, axis=0), s=x.shape)
        res = mask * (x - recon)
        total += 0.5 * float(np.sum(res * res))
    return total


def solve_learning(images, masks, z_all, m, cfg=None, bank0=None, state=None):
    """Filters for fixed sparse maps, shared across all images.

    One data block per image plus the support/unit-ball block. Returns
    ``(bank, report)``.
    """
    cfg = cfg or AdmmConfig()
    images = [np.asarray(x, dtype=float) for x in images]
    masks = [np.asarray(mk, dtype=float) for mk in masks]
    z_all = [np.asarray(z, dtype=float) for z in z_all]
    if not images or not (len(images) == len(masks) == len(z_all)):
        raise InvalidDimensionError("images, masks and maps must align")
    shape = images[0].shape
    k = z_all[0].shape[0]
    for x, mk, z in zip(images, masks, z_all):
        if x.shape != shape or mk.shape != shape or z.shape != (k,) + shape:
            raise InvalidDimensionError("inconsistent canvas dimensions")
    if m < 1 or m > min(shape):
        raise InvalidDimensionError(f"filter side {m} does not fit canvas {shape}")
    if bank0 is None:
        bank0 = np.zeros((k, m, m))
    d0 = proximal.prox_unitball(pad_filter(bank0, shape), m)
    z_spectra = [np.fft.rfft2(z) for z in z_all]
    blocks = [ConvBlock(zh, shape, kind="sparse_maps") for zh in z_spectra]
    blocks.append(IdentityBlock())
    op = StackedOperator(blocks, k, shape, cfg)
    if state is None or not state.compatible(op):
        state = AdmmState.start(op, d0)
    rho = cfg.rho
    proxes = [(lambda v, x=x, mk=mk: proximal.prox_data(v, x, mk, rho))
              for x, mk in zip(images, masks)]
    proxes.append(lambda v: proximal.prox_unitball(v, m))
    objective = lambda d: learning_objective(images, masks, z_spectra, d)
    candidate = _identity_candidate(op, d0)
    if not cfg.track_best:
        objective = None
    d, report = admm_solve(op, proxes, state, rho, cfg.max_iter, cfg.tol,
                           objective, candidate)
    if objective is None:
        d = proximal.prox_unitball(d, m)
    return d[:, :m, :m].copy(), report
