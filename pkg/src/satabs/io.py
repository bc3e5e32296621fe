"""File formats: AIMG frame containers, run configs, manifests and CSV tables.

An AIMG file is a single UTF-8 JSON header line followed by the raw frames as
little-endian float64, row-major within a frame, frame-major overall::

    {"cols":64,"dtype":"f64le","frames":3,"magic":"AIMG1","meta":{...},"rows":64}\\n
    <8 * rows * cols * frames bytes>
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ValidationError

MAGIC = "AIMG1"
DTYPE = "f64le"
MANIFEST_FORMAT = "satabs-manifest-1"


class AimgFormatError(ValidationError):
    """Malformed AIMG container."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_aimg(path, frames, meta=None) -> None:
    """Write ``frames`` (``(F, R, C)`` or a single ``(R, C)`` frame) with ``meta``."""
    arr = np.asarray(frames, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValidationError(f"frames must be 2-D or 3-D, got shape {arr.shape}")
    f, r, c = arr.shape
    header = {"magic": MAGIC, "rows": r, "cols": c, "frames": f, "dtype": DTYPE,
              "meta": meta if meta is not None else {}}
    with open(path, "wb") as fh:
        fh.write(_dumps(header).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))


def read_aimg(path):
    """Read an AIMG container.

    Returns
    -------
    frames : ndarray, shape (F, R, C)
    meta : dict

    Raises
    ------
    AimgFormatError
        Bad magic, unsupported dtype, or a payload of the wrong length.
    """
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    if not line.endswith(b"\n"):
        raise AimgFormatError(f"{path}: missing header terminator")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AimgFormatError(f"{path}: unreadable header: {exc}") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise AimgFormatError(f"{path}: bad magic")
    if header.get("dtype") != DTYPE:
        raise AimgFormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    try:
        r, c, f = (int(header[k]) for k in ("rows", "cols", "frames"))
    except (KeyError, TypeError, ValueError) as exc:
        raise AimgFormatError(f"{path}: incomplete header") from exc
    expected = 8 * r * c * f
    if len(payload) < expected:
        raise AimgFormatError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise AimgFormatError(f"{path}: {len(payload) - expected} trailing bytes")
    frames = np.frombuffer(payload, dtype="<f8").astype(float).reshape(f, r, c)
    return frames, header.get("meta", {})


# -- run configuration -------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scene"],
    "properties": {
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shape": {"type": "array", "items": {"type": "integer", "minimum": 1},
                          "minItems": 2, "maxItems": 2},
                "pixel_pitch": _POS,
                "b_peak": {"type": "number", "minimum": 0},
                "sigma_x": _POS,
                "sigma_y": _POS,
                "cloud_offset": _PAIR,
                "probe_waist": _POS,
                "probe_offset": _PAIR,
                "sweep": {"type": "array", "items": _POS, "minItems": 1},
                "photons_per_pixel_max": {"type": "integer", "minimum": 1},
                "alpha_law": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["constant", "transport"]},
                        "alpha": _POS,
                        "fluorescence": {"type": "boolean"},
                    },
                },
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "read_noise_rms": {"type": "number", "minimum": 0},
                "quantum_efficiency": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "poisson": {"type": "boolean"},
            },
        },
        "transport": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha_iso": {"type": "number", "minimum": 1},
                "alpha_sa": {"type": "number", "minimum": 1},
                "solid_angle": {"type": "number", "minimum": 0},
                "n_grid": {"type": "integer", "minimum": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}},
        },
    },
}


def validate_run_config(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config {where}: {exc.message}") from exc
    return doc


def load_run_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return validate_run_config(doc)


def build_run(doc: dict):
    """Turn a validated config into ``(SceneConfig, NoiseModel)``."""
    from .synth import AlphaLaw, NoiseModel, SceneConfig

    scene = dict(doc["scene"])
    law = dict(scene.pop("alpha_law", {}))
    law.update(doc.get("transport", {}))
    scene_cfg = SceneConfig(alpha_law=AlphaLaw(**law), **scene)
    return scene_cfg, NoiseModel(**doc.get("noise", {}))


# -- tables ------------------------------------------------------------------

def format_value(v) -> str:
    """Shortest round-trip text for floats (at most 17 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_manifest(path, config: dict, entries: list[dict]) -> None:
    write_json(path, {"format": MANIFEST_FORMAT, "config": config, "containers": entries})


def read_manifest(path) -> tuple[dict, list[Path]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValidationError(f"{path}: not a {MANIFEST_FORMAT} manifest")
    base = Path(os.path.dirname(os.path.abspath(path)))
    return doc, [base / e["file"] for e in doc["containers"]]
