"""Seeded synthetic datasets used by the benchmarks and tests."""

import numpy as np

from .spectral import reconstruct


def unit_filters(n, m, rng):
    bank = rng.uniform(-1.0, 1.0, size=(n, m, m))
    return bank / np.sqrt(np.sum(bank**2, axis=(1, 2), keepdims=True))


def spike_images(filters, shape, n_images, density, rng, amplitude=(0.5, 1.5)):
    """Images ``sum_k d_k * z_k`` with Bernoulli(``density``) spike maps.

    Maps are drawn on the full working canvas and the image-sized valid
    region is returned, so no circular wrap-around reaches the images.
    Returns ``(images, maps)``.
    """
    k, m, _ = np.shape(filters)
    h, w = shape
    images, maps = [], []
    for _ in range(n_images):
        size = (k, h + m - 1, w + m - 1)
        z = (rng.uniform(size=size) < density) * rng.uniform(*amplitude, size=size)
        images.append(reconstruct(filters, z)[m - 1:, m - 1:])
        maps.append(z)
    return images, maps


RIDGE = np.eye(5)

_yy, _xx = np.mgrid[-2:3, -2:3]
BLOB = np.exp(-(_yy**2 + _xx**2) / 3.0)


def two_texture_image(shape, n_ridges, n_blobs, rng, noise=0.02, spacing=6,
                      ridge=RIDGE, blob=BLOB):
    """One image with ridge motifs (positive class) and blob motifs.

    Motif centres are kept ``spacing`` pixels apart (Chebyshev) and fully
    inside the image. The label field is +1 at ridge centres and -1 at
    every other pixel. Returns ``(image, labels)``.
    """
    h, w = shape
    r = ridge.shape[0] // 2
    image = np.zeros(shape)
    labels = -np.ones(shape, dtype=np.int64)
    centres = []
    kinds = [1] * n_ridges + [0] * n_blobs
    for kind in kinds:
        for _ in range(1000):
            c = (int(rng.integers(r, h - r)), int(rng.integers(r, w - r)))
            if all(max(abs(c[0] - a), abs(c[1] - b)) >= spacing for a, b in centres):
                break
        else:
            continue
        centres.append(c)
        motif = ridge if kind else blob
        image[c[0] - r:c[0] + r + 1, c[1] - r:c[1] + r + 1] += motif
        if kind:
            labels[c] = 1
    image += noise * rng.standard_normal(shape)
    return np.clip(image, 0.0, 1.0), labels


def two_texture_set(n_images, shape, rng, n_ridges=3, n_blobs=8, **kwargs):
    images, labels = [], []
    for _ in range(n_images):
        img, lab = two_texture_image(shape, n_ridges, n_blobs, rng, **kwargs)
        images.append(img)
        labels.append(lab)
    return images, labels
