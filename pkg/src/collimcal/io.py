"""JSON file formats: observations, calibration results, pose lists.

All files are written with sorted keys, two-space indentation and floats in
``%.17g`` so that writing, reading and writing again is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (
    CameraIntrinsics,
    PlanarObservations,
    PlanarTarget,
    RadialDistortion,
    SphericalExtrinsics,
    View,
    matrix_to_rotvec,
    rotvec_to_matrix,
)


class SchemaError(ValueError):
    """A JSON document does not match the expected format."""


# -- canonical serialisation -------------------------------------------------

def _format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = "%.17g" % x
    if not any(ch in s for ch in ".eE"):
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return _encode(obj, 2, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: invalid JSON ({err})") from err


# -- observations ------------------------------------------------------------

def observations_to_dict(obs: PlanarObservations, truth=None) -> dict:
    doc = {
        "target": {
            "rows": obs.target.rows,
            "cols": obs.target.cols,
            "spacing_mm": float(obs.target.spacing),
        },
        "image_size": [int(obs.image_size[0]), int(obs.image_size[1])],
        "views": [
            {
                "view_id": v.view_id if v.view_id is not None else i,
                "points": [
                    {"index": int(j), "u": float(u), "v": float(vv)}
                    for j, (u, vv) in zip(v.indices, v.image_points)
                ],
            }
            for i, v in enumerate(obs.views)
        ],
    }
    if truth is not None:
        ext = truth.extrinsics
        doc["ground_truth"] = {
            "intrinsics": truth.intrinsics.to_dict(),
            "distortion": truth.distortion.to_dict(),
            "center": ext.t_cp.tolist(),
            "rotations": [matrix_to_rotvec(R).tolist() for R in ext.rotations],
            "view_centers_mm": np.asarray(truth.view_centers).tolist(),
        }
    return doc


def _require(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(f"{where}: missing key {key!r}")
    return d[key]


def observations_from_dict(doc) -> PlanarObservations:
    """Parse and validate an observation document.

    Raises
    ------
    SchemaError
        On missing keys, out-of-range indices or pixels, duplicate indices.
    """
    t = _require(doc, "target", "observations")
    try:
        target = PlanarTarget(int(_require(t, "rows", "target")), int(_require(t, "cols", "target")),
                              float(_require(t, "spacing_mm", "target")))
    except ValueError as err:
        raise SchemaError(f"target: {err}") from err
    size = _require(doc, "image_size", "observations")
    if not (isinstance(size, list) and len(size) == 2):
        raise SchemaError("image_size must be [width, height]")
    w, h = size
    views = []
    for i, vd in enumerate(_require(doc, "views", "observations")):
        pts = _require(vd, "points", f"view {i}")
        try:
            idx = np.array([int(p["index"]) for p in pts], dtype=int)
            uv = np.array([[float(p["u"]), float(p["v"])] for p in pts]).reshape(-1, 2)
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaError(f"view {i}: malformed point entry ({err})") from err
        if idx.size and (idx.min() < 0 or idx.max() >= target.n_points):
            bad = idx[(idx < 0) | (idx >= target.n_points)][0]
            raise SchemaError(f"view {i}: point index {bad} outside 0..{target.n_points - 1}")
        if len(np.unique(idx)) != len(idx):
            vals, counts = np.unique(idx, return_counts=True)
            raise SchemaError(f"view {i}: duplicate point index {vals[counts > 1][0]}")
        out = (uv[:, 0] < 0) | (uv[:, 0] >= w) | (uv[:, 1] < 0) | (uv[:, 1] >= h)
        if np.any(out):
            k = np.flatnonzero(out)[0]
            raise SchemaError(
                f"view {i}: point {idx[k]} at ({uv[k, 0]:.3f}, {uv[k, 1]:.3f}) lies outside "
                f"the {w}x{h} image"
            )
        views.append(View(idx, uv, view_id=vd.get("view_id", i)))
    return PlanarObservations(target, views, (int(w), int(h)))


def load_observations(path) -> PlanarObservations:
    return observations_from_dict(read_json(path))


def ground_truth_from_dict(doc):
    """``(K, dist, extrinsics)`` from an observation document's ground truth, or None."""
    gt = doc.get("ground_truth")
    if gt is None:
        return None
    K = CameraIntrinsics(**gt["intrinsics"])
    dist = RadialDistortion(**gt["distortion"])
    x, y, z = gt["center"]
    rot = [rotvec_to_matrix(r) for r in gt["rotations"]]
    return K, dist, SphericalExtrinsics(x, y, -z, rot)


# -- results -----------------------------------------------------------------

@dataclass
class ResultFile:
    """Calibration result as stored on disk.

    ``rotvecs`` keeps the axis-angle triples exactly as read, so a result
    that is read and written again is byte-identical even though a
    rotation-vector to matrix round trip is not exact in the last bit.
    """

    intrinsics: CameraIntrinsics
    distortion: RadialDistortion
    extrinsics: SphericalExtrinsics
    report: dict = field(default_factory=dict)
    rotvecs: list | None = None

    def to_dict(self) -> dict:
        rotvecs = self.rotvecs
        if rotvecs is None:
            rotvecs = [matrix_to_rotvec(R).tolist() for R in self.extrinsics.rotations]
        return {
            "intrinsics": self.intrinsics.to_dict(),
            "distortion": self.distortion.to_dict(),
            "center_mm": self.extrinsics.t_cp.tolist(),
            "rotations": [list(map(float, r)) for r in rotvecs],
            "report": self.report,
        }

    @classmethod
    def from_dict(cls, doc) -> "ResultFile":
        try:
            K = CameraIntrinsics(**_require(doc, "intrinsics", "result"))
            dist = RadialDistortion(**_require(doc, "distortion", "result"))
            x, y, z = _require(doc, "center_mm", "result")
            rotvecs = [list(map(float, r)) for r in _require(doc, "rotations", "result")]
            ext = SphericalExtrinsics(x, y, -z, [rotvec_to_matrix(r) for r in rotvecs])
        except (TypeError, ValueError) as err:
            raise SchemaError(f"result: {err}") from err
        return cls(K, dist, ext, doc.get("report", {}), rotvecs)


def result_to_dict(K, dist, ext, report: dict) -> dict:
    return ResultFile(K, dist, ext, report).to_dict()


def result_from_dict(doc):
    """Parse a result document into ``(K, dist, extrinsics, report)``."""
    r = ResultFile.from_dict(doc)
    return r.intrinsics, r.distortion, r.extrinsics, r.report


def poses_from_dict(doc):
    """List of ``(R, t)`` from ``{"poses": [{"rotation": rotvec, "translation": t}]}``."""
    try:
        return [
            (rotvec_to_matrix(p["rotation"]), np.asarray(p["translation"], dtype=float))
            for p in _require(doc, "poses", "poses file")
        ]
    except (KeyError, TypeError, ValueError) as err:
        raise SchemaError(f"poses file: {err}") from err


def poses_to_dict(poses) -> dict:
    return {
        "poses": [
            {"rotation": matrix_to_rotvec(R).tolist(), "translation": np.asarray(t).tolist()}
            for R, t in poses
        ]
    }
