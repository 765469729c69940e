"""Coordinate descent over sparse maps, filters and classifier.

Each outer iteration codes every image with the current filters and
classifier, relearns the shared filters from the new maps, then refits the
classifier on the sampled labeled pixels.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import admm, proximal
from .classifier import (ClassifierParams, SampleSet, center_positives,
                         sample_balanced, train_logistic)
from .errors import DegenerateLabelsError, InvalidDimensionError, InvalidParameterError
from .spectral import bank_spectra, canvas_shape, embed, label_offset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 0.5
    gamma: float = 0.0
    alpha: float = 1.0
    rho: float = 1.0
    n_filters: int = 8
    filter_size: int = 11
    outer_iters: int = 15
    inner_iters: int = 10
    code_iters: int = 100
    tol: float = 1e-4
    seed: int = 0
    sample_cap: int = 10000
    center_positives: bool = True
    exact_fourier_solve: bool = False
    newton_tol: float = 1e-10
    newton_max_iter: int = 50

    def __post_init__(self):
        if min(self.beta, self.gamma, self.alpha) < 0:
            raise InvalidParameterError("beta, gamma and alpha must be non-negative")
        if not self.rho > 0:
            raise InvalidParameterError("rho must be positive")
        if self.n_filters < 1 or self.filter_size < 1 or self.outer_iters < 1:
            raise InvalidParameterError("n_filters, filter_size and outer_iters must be >= 1")
        if self.inner_iters < 1 or self.code_iters < 1 or not self.tol > 0:
            raise InvalidParameterError("invalid inner iteration settings")

    def admm(self, max_iter=None):
        return admm.AdmmConfig(
            rho=self.rho, max_iter=max_iter or self.inner_iters, tol=self.tol,
            newton_tol=self.newton_tol, newton_max_iter=self.newton_max_iter,
            exact_fourier_solve=self.exact_fourier_solve)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class TrainedModel:
    bank: np.ndarray
    theta: ClassifierParams
    config: SolverConfig

    def __post_init__(self):
        self.bank = np.asarray(self.bank, dtype=float)
        norms = np.sqrt(np.sum(self.bank**2, axis=(1, 2)))
        if np.any(norms > 1 + 1e-9):
            raise InvalidParameterError("filters violate the unit-norm constraint")


@dataclass
class ObjectiveTerms:
    recon: float
    sparsity: float
    classification: float
    regularizer: float

    @property
    def total(self):
        return self.recon + self.sparsity + self.classification + self.regularizer


@dataclass
class IterationRecord:
    iteration: int
    terms: ObjectiveTerms
    stage_totals: Dict[str, float] = field(default_factory=dict)
    reports: Dict[str, object] = field(default_factory=dict)
    bank: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def total(self):
        return self.terms.total


@dataclass
class IterationTrace:
    records: List[IterationRecord] = field(default_factory=list)
    initial_total: Optional[float] = None
    # cold-start recode of the training set with the final filters
    final: Optional[ObjectiveTerms] = None


def init_dictionary(cfg):
    """Random filters, uniform in (-1, 1), each scaled to unit norm."""
    rng = np.random.default_rng(cfg.seed)
    m = cfg.filter_size
    bank = rng.uniform(-1.0, 1.0, size=(cfg.n_filters, m, m))
    norms = np.sqrt(np.sum(bank**2, axis=(1, 2), keepdims=True))
    return bank / norms


def canvas_samples(samples, image_shape, m):
    """Shift image-pixel samples to the map pixels whose filter they centre on."""
    off = label_offset(m)
    h, w = image_shape
    _, wc = canvas_shape(image_shape, m)
    rows, cols = np.divmod(samples.indices, w)
    return SampleSet((rows + off) * wc + (cols + off), samples.labels)


def prepare(images, masks, m):
    """Embed image-sized arrays into canvases; returns (canvases, canvas masks)."""
    canvases, gates = [], []
    for n, img in enumerate(images):
        img = np.asarray(img, dtype=float)
        if img.ndim != 2 or 0 in img.shape:
            raise InvalidDimensionError(f"image {n} must be a non-empty 2-D array")
        mk = None if masks is None else masks[n]
        c, g = embed(img, m, mk)
        canvases.append(c)
        gates.append(g)
    return canvases, gates


def select_samples(labelfields, cfg, images_shapes):
    """Centre positives (optional) and draw balanced samples per image.

    Images whose label field lacks a class contribute no samples; the pooled
    set must contain both classes.
    """
    out = []
    for n, (lf, shape) in enumerate(zip(labelfields, images_shapes)):
        lf = np.asarray(lf)
        if lf.shape != tuple(shape):
            raise InvalidDimensionError(f"label field {n} shape {lf.shape} != image {shape}")
        if cfg.center_positives:
            lf = center_positives(lf)
        try:
            s = sample_balanced(lf, seed=[cfg.seed, n], cap=cfg.sample_cap)
        except DegenerateLabelsError:
            s = SampleSet()
        out.append(canvas_samples(s, shape, cfg.filter_size))
    if not any(np.any(s.labels > 0) for s in out) or not any(np.any(s.labels < 0) for s in out):
        raise DegenerateLabelsError("labels must contain both classes")
    return out


def evaluate_objective(images, masks, bank, maps, theta, samples, cfg):
    """Full objective on canvases: reconstruction, sparsity and weighted
    classification terms. Returns ``(total, ObjectiveTerms)``."""
    shape = images[0].shape
    spectra = bank_spectra(bank, shape)
    recon = sparsity = loss = 0.0
    for n, (x, mask, z) in enumerate(zip(images, masks, maps)):
        r = np.fft.irfft2(np.sum(spectra * np.fft.rfft2(z), axis=0), s=shape)
        res = mask * (x - r)
        recon += 0.5 * float(np.sum(res * res))
        sparsity += cfg.beta * float(np.sum(np.abs(z)))
        if samples is not None and len(samples[n]):
            s = samples[n]
            scores = s.features(z) @ theta.w + theta.b
            loss += float(np.sum(proximal.logistic_loss(s.labels * scores)))
    reg = cfg.alpha * float(theta.w @ theta.w + theta.b**2)
    terms = ObjectiveTerms(recon, sparsity, cfg.gamma * loss, cfg.gamma * reg)
    return terms.total, terms


def _pooled_features(maps, samples):
    feats = [s.features(z) for z, s in zip(maps, samples) if len(s)]
    labels = [s.labels for s in samples if len(s)]
    return np.concatenate(feats), np.concatenate(labels)


def fit(images, masks=None, labelfields=None, cfg=None, supervised=True, callback=None):
    """Train filters (and classifier) on image-sized arrays.

    Parameters
    ----------
    images : list of 2-D arrays
    masks : list of binary 2-D arrays, optional
        Observed-pixel masks (all observed when omitted).
    labelfields : list of 2-D int arrays, optional
        +1 / -1 / 0 (unlabeled) per pixel; required when ``cfg.gamma > 0``.
    cfg : SolverConfig
    supervised : bool
        ``False`` runs plain convolutional sparse coding (no labels, no
        classifier), the reference the supervised path reduces to at
        ``gamma == 0``.

    Returns
    -------
    model : TrainedModel
    maps : list of (K, H, W) canvas-sized sparse maps
    trace : IterationTrace
    """
    cfg = cfg or SolverConfig()
    if not images:
        raise InvalidDimensionError("need at least one image")
    m, k = cfg.filter_size, cfg.n_filters
    shapes = [np.shape(x) for x in images]
    if len(set(shapes)) != 1:
        raise InvalidDimensionError("all training images must share one size")
    canvases, gates = prepare(images, masks, m)
    if min(canvases[0].shape) < m:
        raise InvalidDimensionError("filter larger than canvas")

    samples = None
    if supervised and labelfields:
        samples = select_samples(labelfields, cfg, shapes)
    elif supervised and cfg.gamma > 0:
        raise DegenerateLabelsError("gamma > 0 requires label fields")

    bank = init_dictionary(cfg)
    theta = ClassifierParams.zeros(k)
    maps = [np.zeros((k,) + c.shape) for c in canvases]
    code_states = [None] * len(canvases)
    learn_state = None
    inner = cfg.admm()
    trace = IterationTrace()
    trace.initial_total, _ = evaluate_objective(canvases, gates, bank, maps, theta, samples, cfg)

    for it in range(1, cfg.outer_iters + 1):
        stages, reports = {}, {"coding": []}
        for n, (x, g) in enumerate(zip(canvases, gates)):
            if supervised:
                s = samples[n] if samples is not None else None
                z, rep = admm.solve_coding_supervised(
                    x, g, bank, theta, s, cfg.beta, cfg.gamma, inner,
                    z0=maps[n], state=code_states[n])
            else:
                z, rep = admm.solve_coding(x, g, bank, cfg.beta, inner,
                                           z0=maps[n], state=code_states[n])
            maps[n] = z
            code_states[n] = rep.state
            reports["coding"].append(rep)
        stages["coding"], _ = evaluate_objective(canvases, gates, bank, maps, theta, samples, cfg)

        bank, rep = admm.solve_learning(canvases, gates, maps, m, inner,
                                        bank0=bank, state=learn_state)
        learn_state = rep.state
        reports["learning"] = rep
        stages["learning"], _ = evaluate_objective(canvases, gates, bank, maps, theta, samples, cfg)

        if samples is not None:
            feats, labels = _pooled_features(maps, samples)
            theta = train_logistic(feats, labels, cfg.alpha, init=theta)
        total, terms = evaluate_objective(canvases, gates, bank, maps, theta, samples, cfg)
        stages["classifier"] = total
        record = IterationRecord(it, terms, stages, reports, bank.copy())
        trace.records.append(record)
        log.info("outer %d: objective %.6g", it, total)
        if callback is not None:
            callback(record)

    model = TrainedModel(bank, theta, cfg)
    final_maps = [code_canvas(model, x, g) for x, g in zip(canvases, gates)]
    _, trace.final = evaluate_objective(canvases, gates, bank, final_maps, theta, samples, cfg)
    return model, maps, trace


def code_canvas(model, canvas, gate, max_iter=None):
    """Cold-start unsupervised coding of one canvas with the model's filters."""
    cfg = model.config
    z, _ = admm.solve_coding(canvas, gate, model.bank, cfg.beta,
                             cfg.admm(max_iter or cfg.code_iters))
    return z


def code_image(model, image, mask=None, max_iter=None):
    """Embed an image-sized array and code it. Returns ``(maps, canvas, gate)``."""
    canvas, gate = embed(image, model.config.filter_size, mask)
    return code_canvas(model, canvas, gate, max_iter), canvas, gate
