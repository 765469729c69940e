"""Reconstruction (PSNR) and pixel-classification (AP) metrics."""

import math

import numpy as np

from .errors import InvalidDimensionError, InvalidParameterError


def psnr(reference, estimate, region=None, peak=1.0):
    """Peak signal-to-noise ratio in dB over the pixels where ``region`` is 1.

    Returns ``math.inf`` for a perfect match.
    """
    reference = np.asarray(reference, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if reference.shape != estimate.shape:
        raise InvalidDimensionError(f"shape mismatch {reference.shape} vs {estimate.shape}")
    if region is None:
        region = np.ones(reference.shape)
    region = np.asarray(region)
    if region.shape != reference.shape:
        raise InvalidDimensionError("region shape differs from images")
    if not peak > 0:
        raise InvalidParameterError("peak must be positive")
    sel = region != 0
    if not sel.any():
        raise InvalidParameterError("PSNR region is empty")
    err = reference[sel] - estimate[sel]
    mse = float(np.mean(err * err))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def average_precision(scores, labels):
    """Mean of precision@r over the ranks r of the positive entries.

    Entries are ranked by descending score; equal scores place negatives
    first, so the value is a deterministic lower bound under ties.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise InvalidDimensionError("scores and labels differ in length")
    positive = labels > 0
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise InvalidParameterError("average precision needs at least one positive")
    order = np.lexsort((positive, -scores))
    hits = positive[order]
    ranks = np.flatnonzero(hits) + 1
    precision = np.arange(1, n_pos + 1) / ranks
    return float(precision.mean())


def pooled_average_precision(score_maps, label_fields, per_image=False):
    """AP over all labeled pixels of several images.

    ``label_fields`` hold +1 / -1 / 0; unlabeled pixels are ignored. With
    ``per_image`` the mean of per-image APs is returned instead (images
    without positives are skipped).
    """
    if per_image:
        values = []
        for s, lf in zip(score_maps, label_fields):
            lf = np.asarray(lf)
            if np.any(lf == 1):
                sel = lf != 0
                values.append(average_precision(np.asarray(s)[sel], lf[sel]))
        if not values:
            raise InvalidParameterError("no image has a positive label")
        return float(np.mean(values))
    scores, labels = [], []
    for s, lf in zip(score_maps, label_fields):
        lf = np.asarray(lf)
        sel = lf != 0
        scores.append(np.asarray(s)[sel])
        labels.append(lf[sel])
    return average_precision(np.concatenate(scores), np.concatenate(labels))
