"""File formats: PGM/PNG images, label images, model and sparse-map
binaries, filter mosaics and CSV tables. Binary fields are little-endian."""

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .classifier import ClassifierParams
from .errors import FormatError, InvalidLabelError, InvalidParameterError

MODEL_MAGIC = b"SCSC"
MODEL_VERSION = 1
MAPS_MAGIC = b"SCZM"
MAPS_VERSION = 1
FLAG_HAS_CLASSIFIER = 1

_MODEL_HEADER = struct.Struct("<4sHHHH")
_MAPS_HEADER = struct.Struct("<4sHHHHH")


# -- images -----------------------------------------------------------------

def _pnm_tokens(data, count, start):
    """Read ``count`` whitespace-separated ASCII tokens, skipping comments.

    Returns ``(tokens, offset)`` with ``offset`` just past the last token.
    """
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise FormatError("truncated PNM header", i)
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        tok = data[i:j]
        if not tok.isdigit():
            raise FormatError(f"expected an integer, found {tok[:16]!r}", i)
        tokens.append(int(tok))
        i = j
    return tokens, i


def parse_pgm(data):
    """Decode P2/P5 bytes into ``(values, maxval)``; values are integers."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise FormatError("not a P2/P5 PGM file", 0)
    kind = data[:2]
    (width, height, maxval), off = _pnm_tokens(data, 3, 2)
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}", 2)
    if not 1 <= maxval <= 65535:
        raise FormatError(f"unsupported maxval {maxval}", off)
    count = width * height
    if kind == b"P5":
        if off >= len(data) or not data[off:off + 1].isspace():
            raise FormatError("missing whitespace after header", off)
        off += 1
        depth = 1 if maxval < 256 else 2
        need = count * depth
        payload = data[off:off + need]
        if len(payload) < need:
            raise FormatError(
                f"truncated payload: expected {need} bytes, found {len(payload)}",
                off + len(payload))
        dtype = np.uint8 if depth == 1 else ">u2"
        values = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    else:
        tokens, _ = _pnm_tokens(data, count, off)
        values = np.asarray(tokens, dtype=np.int64)
    if values.max(initial=0) > maxval:
        raise FormatError(f"pixel value exceeds maxval {maxval}", off)
    return values.reshape(height, width), maxval


def _read_png(path):
    from PIL import Image

    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise FormatError(f"PNG must be 8-bit grayscale, got mode {im.mode}")
            return np.asarray(im, dtype=np.int64), 255
    except OSError as exc:
        raise FormatError(f"cannot decode PNG: {exc}") from exc


def read_raw(path):
    """Integer pixel array and its format maximum."""
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    return parse_pgm(data)


def load_image(path):
    """Grayscale image scaled into [0, 1]."""
    values, maxval = read_raw(path)
    return values.astype(float) / maxval


def to_uint8(image):
    return np.clip(np.rint(np.asarray(image, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, pixels):
    """Write an 8-bit P5 file from uint8 pixels."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(pixels.tobytes())


def write_gray(path, pixels):
    """Write uint8 pixels as PNG or PGM depending on the suffix."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(path)
    else:
        write_pgm(path, pixels)


def save_image(path, image):
    write_gray(path, to_uint8(image))


# -- labels -------------------------------------------------------------------

def labels_from_pixels(values):
    values = np.asarray(values)
    bad = ~np.isin(values, (0, 128, 255))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InvalidLabelError(
            f"label value {int(values[r, c])} at row {r}, column {c}; "
            "expected 0, 128 or 255")
    out = np.zeros(values.shape, dtype=np.int64)
    out[values == 255] = 1
    out[values == 0] = -1
    return out


def load_labels(path):
    """Label field: 255 -> +1, 0 -> -1, 128 -> unlabeled (0)."""
    values, maxval = read_raw(path)
    if maxval != 255:
        raise FormatError(f"label images must have maxval 255, got {maxval}")
    return labels_from_pixels(values)


def save_labels(path, field):
    field = np.asarray(field)
    pixels = np.full(field.shape, 128, dtype=np.uint8)
    pixels[field == 1] = 255
    pixels[field == -1] = 0
    write_gray(path, pixels)


# -- model --------------------------------------------------------------------

def model_to_bytes(model):
    bank = np.asarray(model.bank, dtype="<f8")
    k, m, _ = bank.shape
    theta = model.theta
    config = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    flags = FLAG_HAS_CLASSIFIER if np.any(theta.w) or theta.b else 0
    parts = [
        _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, k, m, flags),
        bank.tobytes(),
        np.asarray(theta.w, dtype="<f8").tobytes(),
        struct.pack("<d", theta.b),
        struct.pack("<I", len(config)),
        config,
    ]
    return b"".join(parts)


def model_from_bytes(data):
    from .trainer import SolverConfig, TrainedModel

    if len(data) < _MODEL_HEADER.size:
        raise FormatError("model file shorter than its header", len(data))
    magic, version, k, m, _flags = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}", 4)
    if k < 1 or m < 1:
        raise FormatError(f"invalid header K={k}, m={m}", 6)
    off = _MODEL_HEADER.size
    n_float = k * m * m + k + 1
    end = off + 8 * n_float
    if len(data) < end + 4:
        raise FormatError(
            f"size mismatch: header K={k}, m={m} needs {end + 4} bytes, file has {len(data)}",
            len(data))
    floats = np.frombuffer(data, dtype="<f8", count=n_float, offset=off).astype(float)
    (clen,) = struct.unpack_from("<I", data, end)
    if len(data) != end + 4 + clen:
        raise FormatError(
            f"size mismatch: expected {end + 4 + clen} bytes, file has {len(data)}", end)
    try:
        config = json.loads(data[end + 4:].decode("utf-8"))
        cfg = SolverConfig.from_dict(config)
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as exc:
        raise FormatError(f"invalid config snapshot: {exc}", end + 4) from exc
    if cfg.n_filters != k or cfg.filter_size != m:
        raise FormatError("config snapshot disagrees with header dimensions", end + 4)
    bank = floats[:k * m * m].reshape(k, m, m)
    theta = ClassifierParams(floats[k * m * m:k * m * m + k], floats[-1])
    return TrainedModel(bank, theta, cfg)


def save_model(model, path):
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())


# -- sparse maps ------------------------------------------------------------

def maps_to_bytes(maps, filter_size):
    maps = np.asarray(maps, dtype="<f8")
    k, h, w = maps.shape
    header = _MAPS_HEADER.pack(MAPS_MAGIC, MAPS_VERSION, k, h, w, filter_size)
    return header + maps.tobytes()


def maps_from_bytes(data):
    """Returns ``(maps, filter_size)``."""
    if len(data) < _MAPS_HEADER.size:
        raise FormatError("maps file shorter than its header", len(data))
    magic, version, k, h, w, m = _MAPS_HEADER.unpack_from(data)
    if magic != MAPS_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != MAPS_VERSION:
        raise FormatError(f"unsupported maps version {version}", 4)
    need = _MAPS_HEADER.size + 8 * k * h * w
    if len(data) != need:
        raise FormatError(f"size mismatch: expected {need} bytes, file has {len(data)}",
                          min(len(data), need))
    maps = np.frombuffer(data, dtype="<f8", offset=_MAPS_HEADER.size).astype(float)
    return maps.reshape(k, h, w), m


def save_maps(path, maps, filter_size):
    Path(path).write_bytes(maps_to_bytes(maps, filter_size))


def load_maps(path):
    return maps_from_bytes(Path(path).read_bytes())


# -- filters mosaic ------------------------------------------------------------

def filter_mosaic(bank, cell_scale=1):
    """Tile filters in a grid ``ceil(sqrt(K))`` cells wide.

    Each filter is min-max scaled to 0..255 on its own (constant filters
    become 128); cells are separated and framed by 1-pixel lines of 128 and
    unused cells stay 0.
    """
    bank = np.asarray(bank, dtype=float)
    k, m, _ = bank.shape
    if k < 1:
        raise InvalidParameterError("need at least one filter")
    scale = max(int(cell_scale), 1)
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    cell = m * scale
    out = np.full((rows * (cell + 1) + 1, cols * (cell + 1) + 1), 128, dtype=np.uint8)
    for i in range(rows * cols):
        r, c = divmod(i, cols)
        top, left = 1 + r * (cell + 1), 1 + c * (cell + 1)
        if i >= k:
            tile = np.zeros((cell, cell), dtype=np.uint8)
        else:
            f = bank[i]
            lo, hi = f.min(), f.max()
            if hi == lo:
                tile = np.full((m, m), 128, dtype=np.uint8)
            else:
                tile = np.rint((f - lo) / (hi - lo) * 255.0).astype(np.uint8)
            tile = np.kron(tile, np.ones((scale, scale), dtype=np.uint8))
        out[top:top + cell, left:left + cell] = tile
    return out


def export_filter_mosaic(bank, path, cell_scale=1):
    write_gray(path, filter_mosaic(bank, cell_scale))


# -- masks & tables -----------------------------------------------------------

def make_dropout_mask(shape, fraction, seed):
    """Binary mask with exactly ``round(fraction * size)`` zeros at random."""
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParameterError(f"fraction must lie in [0, 1], got {fraction}")
    size = int(np.prod(shape))
    n_zero = int(math.floor(fraction * size + 0.5))
    mask = np.ones(size)
    rng = np.random.default_rng(seed)
    mask[rng.choice(size, n_zero, replace=False)] = 0.0
    return mask.reshape(shape)


def format_float(value):
    """Shortest round-tripping text; infinities are written as ``inf``."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def write_csv(path, header, rows):
    """RFC 4180 CSV (CRLF line endings)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


TRACE_HEADER = ["iteration", "total", "recon", "sparsity", "classification", "regularizer"]
SWEEP_HEADER = ["param_value", "ap", "psnr", "wall_seconds"]


def trace_rows(trace):
    rows = []
    for rec in trace.records:
        t = rec.terms
        rows.append([rec.iteration, t.total, t.recon, t.sparsity, t.classification, t.regularizer])
    if trace.final is not None:
        t = trace.final
        rows.append(["final", t.total, t.recon, t.sparsity, t.classification, t.regularizer])
    return rows


def write_trace(path, trace):
    write_csv(path, TRACE_HEADER, trace_rows(trace))
