import json
import struct

import numpy as np
import pytest

from scsc import io
from scsc.classifier import ClassifierParams
from scsc.errors import FormatError, InvalidLabelError, InvalidParameterError
from scsc.trainer import IterationRecord, IterationTrace, ObjectiveTerms, SolverConfig, TrainedModel

from helpers import unit_bank


def _model(rng, k=3, m=4):
    cfg = SolverConfig(n_filters=k, filter_size=m, gamma=2.0, seed=5)
    return TrainedModel(unit_bank(rng, k, m, norm=0.9), ClassifierParams(rng.normal(size=k), rng.normal()), cfg)


def test_parse_p5_and_p2(tmp_path):
    data = b"P5\n# comment\n3 1\n255\n" + bytes([0, 128, 255])
    values, maxval = io.parse_pgm(data)
    assert values.tolist() == [[0, 128, 255]] and maxval == 255
    p = tmp_path / "a.pgm"
    p.write_bytes(data)
    assert io.load_image(p)[0, 2] == 1.0
    p.write_bytes(b"P2\n2 1\n100\n50 100\n")
    assert io.load_image(p).tolist() == [[0.5, 1.0]]


def test_parse_p5_sixteen_bit():
    values, maxval = io.parse_pgm(b"P5 2 1 1000\n" + struct.pack(">HH", 500, 1000))
    assert values.tolist() == [[500, 1000]] and maxval == 1000


def test_truncated_payload_reports_offset():
    header = b"P5\n5 2\n255\n"
    with pytest.raises(FormatError) as info:
        io.parse_pgm(header + bytes(9))
    assert info.value.offset == len(header) + 9
    assert "byte offset" in str(info.value)


@pytest.mark.parametrize("data", [b"", b"P6\n1 1\n255\n\x00", b"P2\n0 1\n255\n",
                                  b"P2\n1 1\n70000\n1", b"P2\n2 1\n9\n1 10\n", b"P5\n1 1\n255"])
def test_malformed_headers(data):
    with pytest.raises(FormatError):
        io.parse_pgm(data)


def test_png_roundtrip_and_rejects_colour(tmp_path):
    from PIL import Image

    pixels = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    io.write_gray(tmp_path / "a.png", pixels)
    values, maxval = io.read_raw(tmp_path / "a.png")
    assert np.array_equal(values, pixels) and maxval == 255
    Image.new("RGB", (2, 2)).save(tmp_path / "c.png")
    with pytest.raises(FormatError):
        io.load_image(tmp_path / "c.png")


def test_image_write_read_roundtrip(tmp_path):
    pixels = np.arange(256, dtype=np.uint8).reshape(16, 16)
    io.write_pgm(tmp_path / "a.pgm", pixels)
    values, _ = io.read_raw(tmp_path / "a.pgm")
    assert np.array_equal(values, pixels)


def test_labels(tmp_path):
    p = tmp_path / "l.pgm"
    io.write_pgm(p, np.full((2, 3), 128, dtype=np.uint8))
    assert np.all(io.load_labels(p) == 0)
    io.write_pgm(p, np.array([[0, 255], [255, 0]], dtype=np.uint8))
    assert io.load_labels(p).tolist() == [[-1, 1], [1, -1]]
    io.write_pgm(p, np.array([[0, 255], [17, 0]], dtype=np.uint8))
    with pytest.raises(InvalidLabelError) as info:
        io.load_labels(p)
    assert "17" in str(info.value) and "row 1" in str(info.value) and "column 0" in str(info.value)
    field = np.array([[1, 0, -1]])
    io.save_labels(p, field)
    assert np.array_equal(io.load_labels(p), field)


def test_model_roundtrip_bitwise(rng, tmp_path):
    model = _model(rng)
    io.save_model(model, tmp_path / "m.scsc")
    back = io.load_model(tmp_path / "m.scsc")
    assert back.bank.tobytes() == model.bank.tobytes()
    assert back.theta.w.tobytes() == model.theta.w.tobytes()
    assert back.theta.b == model.theta.b
    assert back.config == model.config
    assert io.model_to_bytes(back) == io.model_to_bytes(model)


def test_model_header_layout(rng):
    data = io.model_to_bytes(_model(rng, k=3, m=4))
    magic, version, k, m, flags = struct.unpack_from("<4sHHHH", data)
    assert (magic, version, k, m, flags) == (b"SCSC", 1, 3, 4, 1)
    end = 12 + 8 * (3 * 16 + 3 + 1)
    (clen,) = struct.unpack_from("<I", data, end)
    assert json.loads(data[end + 4:end + 4 + clen])["n_filters"] == 3


def test_model_corruptions(rng):
    data = io.model_to_bytes(_model(rng))
    with pytest.raises(FormatError, match="magic"):
        io.model_from_bytes(b"SCSX" + data[4:])
    with pytest.raises(FormatError, match="version"):
        io.model_from_bytes(data[:4] + struct.pack("<H", 2) + data[6:])
    with pytest.raises(FormatError, match="size"):
        io.model_from_bytes(data[:6] + struct.pack("<H", 4) + data[8:])
    with pytest.raises(FormatError, match="size"):
        io.model_from_bytes(data[:-1])
    with pytest.raises(FormatError):
        io.model_from_bytes(data[:5])


def test_maps_roundtrip(rng, tmp_path):
    maps = rng.normal(size=(2, 5, 6))
    io.save_maps(tmp_path / "z.bin", maps, 3)
    back, m = io.load_maps(tmp_path / "z.bin")
    assert back.tobytes() == maps.tobytes() and m == 3
    data = io.maps_to_bytes(maps, 3)
    with pytest.raises(FormatError):
        io.maps_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        io.maps_from_bytes(data + b"\x00")


def test_mosaic_single_filter():
    bank = np.arange(9, dtype=float).reshape(1, 3, 3)
    out = io.filter_mosaic(bank)
    assert out.shape == (5, 5)
    assert np.all(out[0] == 128) and np.all(out[:, 0] == 128)
    assert out[1, 1] == 0 and out[3, 3] == 255


def test_mosaic_constant_filter_and_layout():
    bank = np.zeros((5, 2, 2))
    bank[0] = 0.3
    bank[1:] = np.arange(4.0).reshape(2, 2)
    out = io.filter_mosaic(bank)
    # K=5: 3 columns by 2 rows of 2x2 cells
    assert out.shape == (2 * 3 + 1, 3 * 3 + 1)
    assert np.all(out[1:3, 1:3] == 128)
    assert np.all(out[4:6, 7:9] == 0)
    assert np.all(out[3] == 128) and np.all(out[:, 6] == 128)
    big = io.filter_mosaic(bank, cell_scale=3)
    assert big.shape == (2 * 7 + 1, 3 * 7 + 1)


def test_mosaic_export(rng, tmp_path):
    bank = unit_bank(rng, 4, 3)
    io.export_filter_mosaic(bank, tmp_path / "f.png")
    values, _ = io.read_raw(tmp_path / "f.png")
    assert np.array_equal(values, io.filter_mosaic(bank))


def test_dropout_mask():
    assert np.all(io.make_dropout_mask((4, 4), 0.0, 1) == 1)
    m = io.make_dropout_mask((10, 10), 0.5, 7)
    assert int((m == 0).sum()) == 50
    assert np.array_equal(m, io.make_dropout_mask((10, 10), 0.5, 7))
    assert int((io.make_dropout_mask((3, 3), 0.5, 1) == 0).sum()) == 5
    with pytest.raises(InvalidParameterError):
        io.make_dropout_mask((2, 2), 1.5, 0)


def test_csv_and_trace(tmp_path):
    rows = [[0.1, 1.0 / 3.0, float("inf"), 2]]
    io.write_csv(tmp_path / "s.csv", io.SWEEP_HEADER, rows)
    raw = (tmp_path / "s.csv").read_bytes()
    assert raw.startswith(b"param_value,ap,psnr,wall_seconds\r\n")
    header, body = io.read_csv(tmp_path / "s.csv")
    assert float(body[0][1]) == 1.0 / 3.0 and body[0][2] == "inf"
    trace = IterationTrace([IterationRecord(1, ObjectiveTerms(1.0, 2.0, 0.5, 0.25))],
                           final=ObjectiveTerms(0.5, 1.0, 0.0, 0.0))
    io.write_trace(tmp_path / "t.csv", trace)
    header, body = io.read_csv(tmp_path / "t.csv")
    assert header == ["iteration", "total", "recon", "sparsity", "classification", "regularizer"]
    assert body[0][:2] == ["1", "3.75"] and body[1][0] == "final"
