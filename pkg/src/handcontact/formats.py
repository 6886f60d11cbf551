"""Line-delimited JSON file formats.

One record per line, absolute pixel coordinates, field names as documented in
docs/FORMATS.md. Readers raise FileFormatError with the offending line number.
"""

import json

import numpy as np

from .baseline import N_JOINTS, PoseRecord
from .errors import FileFormatError
from .evaluation import DetectionRecord
from .geometry import AxisBox, HandAnnotation, ImageRecord, Quadrilateral
from .head import N_STATES
from .synthetic import Sample


def _read_lines(path):
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise FileFormatError(path, line_no, f"invalid JSON: {exc}") from exc


def _field(obj, key, path, line_no):
    if key not in obj:
        raise FileFormatError(path, line_no, f"missing field {key!r}")
    return obj[key]


def _axis_box(values, path, line_no):
    if not isinstance(values, (list, tuple)) or len(values) != 4:
        raise FileFormatError(path, line_no, f"box must be [x_min, y_min, x_max, y_max], got {values!r}")
    try:
        return AxisBox(*(float(v) for v in values))
    except Exception as exc:
        raise FileFormatError(path, line_no, f"bad box {values!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# annotations


def read_annotations(path):
    records = []
    for line_no, obj in _read_lines(path):
        try:
            hands = [
                HandAnnotation(
                    quad=Quadrilateral(_field(h, "quad", path, line_no)),
                    contact=tuple(_field(h, "contact", path, line_no)),
                )
                for h in _field(obj, "hands", path, line_no)
            ]
            objects = [_axis_box(b, path, line_no) for b in obj.get("objects", [])]
            records.append(
                ImageRecord(
                    image_id=str(_field(obj, "image_id", path, line_no)),
                    width=float(_field(obj, "width", path, line_no)),
                    height=float(_field(obj, "height", path, line_no)),
                    hands=hands,
                    objects=objects,
                )
            )
        except FileFormatError:
            raise
        except Exception as exc:
            raise FileFormatError(path, line_no, str(exc)) from exc
    return records


def write_annotations(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({
                "image_id": rec.image_id,
                "width": rec.width,
                "height": rec.height,
                "hands": [
                    {"quad": h.quad.as_list(), "contact": list(h.contact)} for h in rec.hands
                ],
                "objects": [b.as_list() for b in rec.objects],
            }) + "\n")


# ---------------------------------------------------------------------------
# detections


def read_detections(path):
    dets = []
    for line_no, obj in _read_lines(path):
        try:
            dets.append(
                DetectionRecord(
                    image_id=str(_field(obj, "image_id", path, line_no)),
                    box=_axis_box(_field(obj, "box", path, line_no), path, line_no),
                    det_score=float(_field(obj, "det_score", path, line_no)),
                    contact_probs=tuple(_field(obj, "contact_probs", path, line_no)),
                )
            )
        except FileFormatError:
            raise
        except Exception as exc:
            raise FileFormatError(path, line_no, str(exc)) from exc
    return dets


def write_detections(path, detections):
    with open(path, "w") as fh:
        for det in detections:
            fh.write(json.dumps({
                "image_id": det.image_id,
                "box": det.box.as_list(),
                "det_score": det.det_score,
                "contact_probs": list(det.contact_probs),
            }) + "\n")


# ---------------------------------------------------------------------------
# keypoints


def read_keypoints(path):
    """image_id -> list of PoseRecord."""
    out = {}
    for line_no, obj in _read_lines(path):
        try:
            poses = []
            for p in _field(obj, "poses", path, line_no):
                joints = np.asarray(_field(p, "joints", path, line_no), dtype=np.float64)
                if joints.shape != (N_JOINTS, 3):
                    raise FileFormatError(
                        path, line_no, f"pose needs {N_JOINTS} [x, y, conf] joints"
                    )
                poses.append(PoseRecord(person_id=str(p.get("person_id", len(poses))), joints=joints))
            out[str(_field(obj, "image_id", path, line_no))] = poses
        except FileFormatError:
            raise
        except Exception as exc:
            raise FileFormatError(path, line_no, str(exc)) from exc
    return out


# ---------------------------------------------------------------------------
# feature maps (synthetic or exported)


def read_features(path):
    """Feature blocks, one hand per line: n x d hand map plus K union maps.
    Returns a list of dicts with Sample plus passthrough metadata."""
    entries = []
    for line_no, obj in _read_lines(path):
        try:
            hand = np.asarray(_field(obj, "hand", path, line_no), dtype=np.float64)
            if hand.ndim != 2:
                raise FileFormatError(path, line_no, "hand map must be a 2-d array")
            unions = [np.asarray(u, dtype=np.float64) for u in obj.get("unions", [])]
            for u in unions:
                if u.shape != hand.shape:
                    raise FileFormatError(
                        path, line_no, f"union map shape {u.shape} != hand map {hand.shape}"
                    )
            label = obj.get("label")
            entries.append({
                "image_id": str(obj.get("image_id", f"hand-{line_no}")),
                "det_score": float(obj.get("det_score", 1.0)),
                "box": _axis_box(obj["box"], path, line_no) if "box" in obj else None,
                "sample": Sample(hand=hand, unions=unions,
                                 label=tuple(label) if label else None),
            })
        except FileFormatError:
            raise
        except Exception as exc:
            raise FileFormatError(path, line_no, str(exc)) from exc
    return entries


def write_features(path, samples, image_ids=None):
    with open(path, "w") as fh:
        for i, sample in enumerate(samples):
            doc = {
                "image_id": image_ids[i] if image_ids else f"hand-{i}",
                "hand": sample.hand.tolist(),
                "unions": [u.tolist() for u in sample.unions],
            }
            if sample.label is not None:
                doc["label"] = list(sample.label)
            fh.write(json.dumps(doc) + "\n")
