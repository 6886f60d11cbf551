"""Pose-heuristic contact baseline.

Builds a 52-value feature per hand from ingested body keypoints and object
boxes: 24 wrist-to-joint distances for the same person, 25 wrist-to-joint
distances averaged over other people, and 3 hand-object relation statistics.
Distances are normalized by the image diagonal so the feature is invariant to
uniform rescaling. Four independent logistic models are fit on the masked
binary labels.
"""

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import ContractError, DimensionError
from .geometry import intersection_area, iou, overlap_fraction
from .head import CONTACT_STATES, UNSURE, YES

N_JOINTS = 25
# wrist slots in the documented joint order (docs/FORMATS.md); the index map
# is fixed by this artifact and otherwise treated as opaque
RIGHT_WRIST, LEFT_WRIST = 4, 7
SELF_DIM, OTHER_DIM, OBJECT_DIM = N_JOINTS - 1, N_JOINTS, 3
FEATURE_DIM = SELF_DIM + OTHER_DIM + OBJECT_DIM  # 52


@dataclass
class PoseRecord:
    person_id: str
    joints: np.ndarray  # (25, 3): x, y, confidence; confidence 0 marks missing

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.shape != (N_JOINTS, 3):
            raise DimensionError(f"pose needs {N_JOINTS} (x, y, conf) joints, got {self.joints.shape}")


def assign_wrist(hand, poses):
    """Nearest visible wrist to the hand-box center; its pose is 'same person'.

    Returns (pose_index, joint_index) or None when no pose has a visible wrist.
    """
    if not poses:
        raise ContractError("assign_wrist: empty pose list")
    cx, cy = hand.center
    best = None
    for pi, pose in enumerate(poses):
        for ji in (RIGHT_WRIST, LEFT_WRIST):
            x, y, conf = pose.joints[ji]
            if conf <= 0:
                continue
            dist = math.hypot(x - cx, y - cy)
            if best is None or dist < best[0]:
                best = (dist, pi, ji)
    if best is None:
        return None
    return best[1], best[2]


def self_distances(pose, wrist_joint, diagonal):
    """Distances from the wrist to the person's other 24 joints, normalized by
    the image diagonal; missing joints contribute 0."""
    wx, wy, wconf = pose.joints[wrist_joint]
    if wconf <= 0:
        raise ContractError("self_distances: wrist joint is not visible")
    out = []
    for j in range(N_JOINTS):
        if j == wrist_joint:
            continue
        x, y, conf = pose.joints[j]
        out.append(math.hypot(x - wx, y - wy) / diagonal if conf > 0 else 0.0)
    return np.array(out)


def other_person_distances(wrist_xy, other_poses, diagonal):
    """Per joint slot, the mean normalized wrist distance over other people;
    missing joints are skipped, and no other people gives all zeros."""
    wx, wy = wrist_xy
    out = np.zeros(N_JOINTS)
    for j in range(N_JOINTS):
        dists = [
            math.hypot(p.joints[j][0] - wx, p.joints[j][1] - wy) / diagonal
            for p in other_poses
            if p.joints[j][2] > 0
        ]
        if dists:
            out[j] = sum(dists) / len(dists)
    return out


def object_relation(hand, objects, diagonal):
    """(mean normalized center distance, mean overlap fraction, mean IoU) of
    the hand against the detected objects; no objects gives (0, 0, 0)."""
    if not objects:
        return np.zeros(OBJECT_DIM)
    hx, hy = hand.center
    dists, overlaps, ious = [], [], []
    for obj in objects:
        ox, oy = obj.center
        dists.append(math.hypot(ox - hx, oy - hy) / diagonal)
        overlaps.append(overlap_fraction(hand, obj))
        ious.append(iou(hand, obj))
    return np.array([np.mean(dists), np.mean(overlaps), np.mean(ious)])


def hand_feature(hand, poses, objects, width, height):
    """52-value feature for one hand, or None when no wrist is visible."""
    diagonal = math.hypot(width, height)
    assignment = assign_wrist(hand, poses) if poses else None
    if assignment is None:
        return None
    pi, ji = assignment
    pose = poses[pi]
    others = [p for k, p in enumerate(poses) if k != pi]
    h_self = self_distances(pose, ji, diagonal)
    h_people = other_person_distances(tuple(pose.joints[ji][:2]), others, diagonal)
    h_objects = object_relation(hand, objects, diagonal)
    return np.concatenate([h_self, h_people, h_objects])


class BaselineClassifier:
    """Four independent logistic models over the 52-value feature."""

    def __init__(self):
        self.weights = np.zeros((len(CONTACT_STATES), FEATURE_DIM))
        self.bias = np.zeros(len(CONTACT_STATES))
        self.trained = [False] * len(CONTACT_STATES)

    def predict(self, feature):
        """Per-state probabilities; untrained states answer 0.5."""
        feature = np.asarray(feature, dtype=np.float64)
        logits = self.weights @ feature + self.bias
        probs = kernels.sigmoid(logits)
        for s in range(len(CONTACT_STATES)):
            if not self.trained[s]:
                probs[s] = 0.5
        return probs


def train_baseline(examples, lr=0.5, steps=2000):
    """Fit the four logistic models by full-batch gradient descent on the
    masked binary cross-entropy. examples: iterable of (feature, label) with
    label a 4-tuple over {yes, no, unsure}. A state with no usable labels is
    left untrained. Deterministic (zero init, fixed order)."""
    examples = [(np.asarray(f, dtype=np.float64), lab) for f, lab in examples]
    model = BaselineClassifier()
    for s in range(len(CONTACT_STATES)):
        xs = [f for f, lab in examples if lab[s] != UNSURE]
        ts = [1.0 if lab[s] == YES else 0.0 for _, lab in examples if lab[s] != UNSURE]
        if not xs:
            continue
        x = np.stack(xs)
        t = np.array(ts)
        w = np.zeros(FEATURE_DIM)
        b = 0.0
        inv = 1.0 / len(xs)
        for _ in range(steps):
            err = kernels.sigmoid(x @ w + b) - t
            w -= lr * inv * (x.T @ err)
            b -= lr * inv * err.sum()
        model.weights[s] = w
        model.bias[s] = b
        model.trained[s] = True
    return model
