"""End-to-end steps shared by the CLI and the benchmarks: coding with a
trained model, score maps, retrained-classifier AP and inpainting."""

import numpy as np

from . import metrics
from .classifier import center_positives, predict_scores, sample_balanced, train_logistic
from .io import make_dropout_mask
from .spectral import crop_valid, label_offset, reconstruct
from .trainer import canvas_samples, code_image


def reconstruct_image(model, image, mask=None, max_iter=None):
    """Code ``image`` (observed where ``mask`` is 1) and return the image-sized
    reconstruction together with the canvas maps."""
    z, _, _ = code_image(model, image, mask, max_iter)
    m = model.config.filter_size
    return crop_valid(reconstruct(model.bank, z), m), z


def score_map(theta, z, image_shape, m):
    """Image-aligned class probabilities from canvas maps."""
    off = label_offset(m)
    h, w = image_shape
    return predict_scores(theta, z)[off:off + h, off:off + w]


def retrain_classifier(model, images, labelfields, maps=None):
    """Fit a fresh logistic model on sparse maps of ``images``.

    Positives are centred when the model was trained that way; classes are
    balanced per image with the model's seed and cap.
    """
    cfg = model.config
    m = cfg.filter_size
    feats, labels = [], []
    for n, (img, lf) in enumerate(zip(images, labelfields)):
        z = maps[n] if maps is not None else code_image(model, img)[0]
        lf = np.asarray(lf)
        if cfg.center_positives:
            lf = center_positives(lf)
        if not (np.any(lf == 1) and np.any(lf == -1)):
            continue
        s = canvas_samples(sample_balanced(lf, [cfg.seed, n], cfg.sample_cap), lf.shape, m)
        feats.append(s.features(z))
        labels.append(s.labels)
    return train_logistic(np.concatenate(feats), np.concatenate(labels), cfg.alpha)


def evaluate(model, images, labelfields, theta=None, per_image=False):
    """AP of pixel scores on ``images`` plus the mean valid-region PSNR.

    Returns ``(ap, psnr, score_maps)``.
    """
    theta = theta or model.theta
    m = model.config.filter_size
    scores, psnrs = [], []
    for img in images:
        img = np.asarray(img, dtype=float)
        z, _, _ = code_image(model, img)
        scores.append(score_map(theta, z, img.shape, m))
        psnrs.append(metrics.psnr(img, crop_valid(reconstruct(model.bank, z), m)))
    ap = metrics.pooled_average_precision(scores, labelfields, per_image=per_image)
    return ap, float(np.mean(psnrs)), scores


def inpaint(model, image, fraction=0.5, seed=0):
    """Drop a random fraction of pixels, code what is left and reconstruct.

    Returns ``(psnr, reconstruction, mask)`` where the PSNR compares the
    reconstruction with the complete original over the whole image.
    """
    image = np.asarray(image, dtype=float)
    mask = make_dropout_mask(image.shape, fraction, seed)
    recon, _ = reconstruct_image(model, image, mask)
    return metrics.psnr(image, recon), recon, mask


def mean_fill(image, mask):
    """Baseline inpainting: unobserved pixels take the mean observed value."""
    image = np.asarray(image, dtype=float)
    mask = np.asarray(mask) != 0
    fill = image[mask].mean() if mask.any() else 0.0
    return np.where(mask, image, fill)
