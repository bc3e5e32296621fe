import hashlib
import json

import numpy as np
import pytest

from satabs.errors import ValidationError
from satabs.io import (AimgFormatError, build_run, format_value, read_aimg,
                       validate_run_config, write_aimg, write_csv)

# SHA-256 of the reference container below; changes only if the format does
REFERENCE_SHA256 = "1d9c4d1289d8e24763235da4c3745ebac087de675c98be1c57ebc9dd90753d21"


def test_single_value_round_trip(tmp_path):
    path = tmp_path / "one.aimg"
    write_aimg(path, np.array([[[0.5]]]), {"a": 1})
    frames, meta = read_aimg(path)
    assert frames.shape == (1, 1, 1) and frames[0, 0, 0] == 0.5
    assert meta == {"a": 1}
    raw = path.read_bytes()
    assert raw.split(b"\n", 1)[1] == np.float64(0.5).astype("<f8").tobytes()


def test_round_trip_is_byte_identical(tmp_path, rng):
    a, b = tmp_path / "a.aimg", tmp_path / "b.aimg"
    frames = rng.normal(size=(3, 7, 5)) * 1e300
    frames[0, 0, 0] = np.nan
    write_aimg(a, frames, {"x": [1, 2.5]})
    back, meta = read_aimg(a)
    write_aimg(b, back, meta)
    assert a.read_bytes() == b.read_bytes()
    assert np.array_equal(back, frames, equal_nan=True)


def test_layout_is_frame_then_row_major(tmp_path):
    frames = np.arange(12, dtype=float).reshape(2, 2, 3)
    write_aimg(tmp_path / "l.aimg", frames)
    header, payload = (tmp_path / "l.aimg").read_bytes().split(b"\n", 1)
    assert json.loads(header) == {"magic": "AIMG1", "rows": 2, "cols": 3, "frames": 2,
                                  "dtype": "f64le", "meta": {}}
    assert np.frombuffer(payload, "<f8").tolist() == list(range(12))


def test_reference_hash(tmp_path):
    frames = np.random.default_rng(12345).normal(size=(3, 64, 64))
    path = tmp_path / "ref.aimg"
    write_aimg(path, frames, {"seed": 12345, "note": "determinism"})
    assert hashlib.sha256(path.read_bytes()).hexdigest() == REFERENCE_SHA256


def test_truncated(tmp_path):
    path = tmp_path / "t.aimg"
    write_aimg(path, np.zeros((1, 4, 4)))
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(AimgFormatError, match="truncated"):
        read_aimg(path)


def test_bad_magic_and_dtype(tmp_path):
    path = tmp_path / "m.aimg"
    write_aimg(path, np.zeros((1, 1, 1)))
    raw = path.read_bytes()
    path.write_bytes(raw.replace(b"AIMG1", b"AIMG2"))
    with pytest.raises(AimgFormatError, match="magic"):
        read_aimg(path)
    path.write_bytes(raw.replace(b"f64le", b"f32le"))
    with pytest.raises(AimgFormatError, match="dtype"):
        read_aimg(path)


def test_trailing_bytes(tmp_path):
    path = tmp_path / "x.aimg"
    write_aimg(path, np.zeros((1, 1, 1)))
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(AimgFormatError):
        read_aimg(path)


def test_format_value_round_trips(rng):
    for v in rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, 200):
        text = format_value(v)
        assert float(text) == v
        digits = text.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
        assert len(digits) <= 17
    assert format_value(0.1) == "0.1"
    assert format_value(float("nan")) == "nan"
    assert format_value(np.int64(3)) == "3"


def test_csv_is_deterministic(tmp_path):
    rows = [(1, 0.1 + 0.2, "ok"), (2, 1e-300, "clamped")]
    write_csv(tmp_path / "a.csv", ("i", "x", "q"), rows)
    assert (tmp_path / "a.csv").read_text() == "i,x,q\n1,0.30000000000000004,ok\n2,1e-300,clamped\n"


def test_config_schema():
    doc = {"scene": {"b_peak": 2.0, "alpha_law": {"kind": "transport"}},
           "noise": {"seed": 4}, "transport": {"alpha_iso": 1.0, "n_grid": 500}}
    scene, noise = build_run(validate_run_config(doc))
    assert scene.alpha_law.alpha_iso == 1.0 and scene.alpha_law.n_grid == 500
    assert noise.seed == 4
    for bad in ({"scene": {}, "extra": 1},
                {"scene": {"unknown": 1}},
                {"scene": {"alpha_law": {"kind": "cubic"}}},
                {"scene": {}, "noise": {"seed": -1}},
                {"noise": {}}):
        with pytest.raises(ValidationError):
            validate_run_config(bad)
