"""Joint hand-detection + contact-recognition average precision.

For each contact state: ground truth is every hand annotated yes for that
state, a detection counts as a true positive when its box IoU with an unused
ground-truth hand exceeds 0.5, and detections are ranked by detection score
times predicted contact probability. Detections whose best-overlapping hand
(IoU > 0.5) is annotated unsure for the state are excluded from scoring
before ranking. AP is the area under the precision envelope over all points.

Score ties rank by input order; results are bit-reproducible.
"""

from dataclasses import dataclass, field

from .errors import EvaluationError, IngestionError
from .geometry import envelope, iou
from .head import CONTACT_STATES, UNSURE, YES

IOU_THRESHOLD = 0.5


@dataclass
class DetectionRecord:
    image_id: str
    box: "AxisBox"
    det_score: float
    contact_probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.contact_probs)
        if len(probs) != len(CONTACT_STATES):
            raise IngestionError(f"detection needs {len(CONTACT_STATES)} contact probabilities")
        if not 0.0 <= self.det_score <= 1.0 or any(not 0.0 <= p <= 1.0 for p in probs):
            raise IngestionError("detection scores and probabilities must lie in [0, 1]")
        self.contact_probs = probs


@dataclass
class PRCurve:
    recalls: list = field(default_factory=list)
    precisions: list = field(default_factory=list)
    ap: float = None  # None when the state has no ground truth
    n_gt: int = 0


def average_precision(recalls, precisions):
    """Area under the precision envelope (all-point interpolation)."""
    if not recalls:
        return 0.0
    mrec = [0.0] + list(recalls)
    mpre = [0.0] + list(precisions)
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return sum((mrec[i + 1] - mrec[i]) * mpre[i + 1] for i in range(len(mrec) - 1))


def evaluate_state(detections, records, state):
    """PR curve and AP for one contact state (0..3)."""
    if not 0 <= state < len(CONTACT_STATES):
        raise EvaluationError(f"state index {state} out of range")
    by_image = {}
    for rec in records:
        hands = [(envelope(h.quad), h.contact[state]) for h in rec.hands]
        by_image[rec.image_id] = hands
    n_gt = sum(1 for hands in by_image.values() for _, lab in hands if lab == YES)

    kept = []
    for det in detections:
        if det.image_id not in by_image:
            raise IngestionError(f"detection references unknown image id {det.image_id!r}")
        hands = by_image[det.image_id]
        best_iou, best_label = 0.0, None
        for box, lab in hands:
            v = iou(det.box, box)
            if v > best_iou:
                best_iou, best_label = v, lab
        if best_iou > IOU_THRESHOLD and best_label == UNSURE:
            continue  # not measured against unsure hands
        kept.append(det)

    order = sorted(
        range(len(kept)),
        key=lambda i: -kept[i].det_score * kept[i].contact_probs[state],
    )

    matched = {image_id: [False] * len(hands) for image_id, hands in by_image.items()}
    recalls, precisions = [], []
    tp = fp = 0
    for rank in order:
        det = kept[rank]
        hands = by_image[det.image_id]
        best_iou, best_j = 0.0, -1
        for j, (box, lab) in enumerate(hands):
            if lab != YES:
                continue
            v = iou(det.box, box)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_iou > IOU_THRESHOLD and not matched[det.image_id][best_j]:
            matched[det.image_id][best_j] = True
            tp += 1
        else:
            fp += 1
        if n_gt > 0:
            recalls.append(tp / n_gt)
            precisions.append(tp / (tp + fp))

    if n_gt == 0:
        return PRCurve(recalls=[], precisions=[], ap=None, n_gt=0)
    return PRCurve(recalls=recalls, precisions=precisions,
                   ap=average_precision(recalls, precisions), n_gt=n_gt)


def mean_ap(curves):
    """Mean of the defined per-state APs."""
    defined = [c.ap for c in curves if c.ap is not None]
    if not defined:
        raise EvaluationError("no contact state has ground truth; mAP undefined")
    return sum(defined) / len(defined)


def evaluate(detections, records):
    """All four per-state curves plus mAP, as a plain serializable dict."""
    curves = [evaluate_state(detections, records, s) for s in range(len(CONTACT_STATES))]
    return {
        "per_state": {
            CONTACT_STATES[s]: {
                "ap": curves[s].ap,
                "n_gt": curves[s].n_gt,
                "recalls": curves[s].recalls,
                "precisions": curves[s].precisions,
            }
            for s in range(len(CONTACT_STATES))
        },
        "map": mean_ap(curves),
    }
