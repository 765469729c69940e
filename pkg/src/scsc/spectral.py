"""Fourier-domain kernel: transforms, filter support handling, circular
convolution and the reconstruction operator.

Filters live in the top-left ``m x m`` corner of the working canvas. An
``h x w`` image is placed at offset ``(m - 1, m - 1)`` in a canvas of shape
``(h + m - 1, w + m - 1)``, so every image pixel is reconstructed without
circular wrap-around and the ring of ``m - 1`` leading rows/columns is
excluded by the boundary mask.
"""

import numpy as np

from .errors import InvalidDimensionError


def _as_image(img, name="image"):
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise InvalidDimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidDimensionError(f"{name} has a zero dimension: {arr.shape}")
    return arr


def fft2(img):
    """Unnormalised 2-D DFT of a real image (full complex spectrum)."""
    return np.fft.fft2(_as_image(img))


def ifft2(spectrum, real=True):
    """Inverse of :func:`fft2`; divides by the number of pixels.

    With ``real=True`` the imaginary round-off is discarded.
    """
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 2 or 0 in spectrum.shape:
        raise InvalidDimensionError(f"bad spectrum shape {spectrum.shape}")
    out = np.fft.ifft2(spectrum)
    return out.real if real else out


def _check_support(m, shape):
    m = int(m)
    if m < 1 or m > min(shape[-2], shape[-1]):
        raise InvalidDimensionError(
            f"filter side {m} does not fit canvas {tuple(shape[-2:])}")
    return m


def pad_filter(filt, canvas):
    """Zero-pad an ``m x m`` filter (or a stack of them) to ``canvas``.

    The filter occupies the top-left block. A leading stack axis is kept.
    """
    filt = np.asarray(filt, dtype=float)
    if filt.ndim < 2 or filt.shape[-1] != filt.shape[-2]:
        raise InvalidDimensionError(f"filters must be square, got {filt.shape}")
    height, width = canvas
    m = _check_support(filt.shape[-1], (height, width))
    out = np.zeros(filt.shape[:-2] + (height, width))
    out[..., :m, :m] = filt
    return out


def crop_filter(img, m):
    """Return the top-left ``m x m`` block of a canvas (or stack)."""
    img = np.asarray(img, dtype=float)
    if img.ndim < 2:
        raise InvalidDimensionError(f"expected a 2-D canvas, got {img.shape}")
    m = _check_support(m, img.shape)
    return img[..., :m, :m].copy()


def circ_conv(a, b):
    """Circular 2-D convolution of two equally sized images."""
    a = _as_image(a, "a")
    b = _as_image(b, "b")
    if a.shape != b.shape:
        raise InvalidDimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.fft.irfft2(np.fft.rfft2(a) * np.fft.rfft2(b), s=a.shape)


def bank_spectra(bank, canvas):
    """Half-plane spectra (``rfft2``) of the padded filters, shape (K, H, W//2+1)."""
    return np.fft.rfft2(pad_filter(bank, canvas))


def reconstruct(bank, z):
    """Sum over k of ``d_k * z_k`` on the canvas of ``z``."""
    bank = np.asarray(bank, dtype=float)
    z = np.asarray(z, dtype=float)
    if bank.ndim != 3 or z.ndim != 3:
        raise InvalidDimensionError("bank must be (K, m, m) and z (K, H, W)")
    if bank.shape[0] != z.shape[0]:
        raise InvalidDimensionError(
            f"filter count {bank.shape[0]} != map count {z.shape[0]}")
    shape = z.shape[1:]
    zhat = np.fft.rfft2(z)
    return np.fft.irfft2(np.sum(bank_spectra(bank, shape) * zhat, axis=0), s=shape)


def canvas_shape(image_shape, m):
    h, w = image_shape
    return (h + m - 1, w + m - 1)


def embed(image, m, mask=None):
    """Place ``image`` in its working canvas.

    Returns ``(canvas, canvas_mask)``; the mask is 1 on observed image pixels
    (``mask`` restricts it further, e.g. for inpainting) and 0 on the
    boundary ring.
    """
    image = _as_image(image)
    shape = canvas_shape(image.shape, m)
    canvas = np.zeros(shape)
    gate = np.zeros(shape)
    canvas[m - 1:, m - 1:] = image
    if mask is None:
        gate[m - 1:, m - 1:] = 1.0
    else:
        mask = np.asarray(mask, dtype=float)
        if mask.shape != image.shape:
            raise InvalidDimensionError(
                f"mask shape {mask.shape} != image shape {image.shape}")
        gate[m - 1:, m - 1:] = mask
    return canvas * gate, gate


def crop_valid(canvas, m):
    """Inverse of :func:`embed`: the image-sized region of a canvas."""
    return np.asarray(canvas)[..., m - 1:, m - 1:]


def label_offset(m):
    """Canvas offset of the map pixel whose filter is centred on an image pixel.

    A map value at canvas pixel ``p`` paints its filter over ``p .. p+m-1``;
    the filter centre sits at ``p + (m-1)//2``. Image pixel ``r`` lives at
    canvas row ``r + m - 1``.
    """
    return m - 1 - (m - 1) // 2
