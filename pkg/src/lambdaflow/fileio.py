"""JSON and CSV formats for curves, reparametrizations and reports.

JSON floats are written with ``repr`` precision, so a curve read back is
bit-identical to the one written.  CSV columns use 17 significant digits.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .metric import SampledCurve, TimeReparam

__all__ = [
    "curve_from_dict",
    "curve_to_dict",
    "dump_json",
    "load_curve",
    "load_json",
    "load_reparam",
    "reparam_from_dict",
    "reparam_to_dict",
    "save_curve",
    "save_reparam",
    "write_csv",
]


def curve_to_dict(c: SampledCurve):
    return {"dim": int(c.dim), "times": c.times.tolist(), "points": c.points.tolist()}


def curve_from_dict(data):
    try:
        times = np.asarray(data["times"], dtype=np.float64)
        points = np.asarray(data["points"], dtype=np.float64)
        dim = int(data.get("dim", points.shape[-1] if points.ndim == 2 else 1))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed curve: {exc}") from None
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[1] != dim:
        raise ConfigError(f"curve points do not have dimension {dim}")
    return SampledCurve(times, points)


def reparam_to_dict(m: TimeReparam):
    return {"grid": m.grid.tolist(), "values": m.values.tolist()}


def reparam_from_dict(data):
    try:
        return TimeReparam(np.asarray(data["grid"], dtype=np.float64), np.asarray(data["values"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed reparametrization: {exc}") from None


def dump_json(obj, path=None, indent=None):
    text = json.dumps(obj, indent=indent, allow_nan=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def save_curve(c: SampledCurve, path):
    return dump_json(curve_to_dict(c), path)


def load_curve(path):
    return curve_from_dict(load_json(path))


def save_reparam(m: TimeReparam, path):
    return dump_json(reparam_to_dict(m), path)


def load_reparam(path):
    return reparam_from_dict(load_json(path))


def write_csv(path, header, *columns):
    """Write equal-length columns with a header row."""
    rows = zip(*[np.asarray(c, dtype=np.float64) for c in columns])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])
