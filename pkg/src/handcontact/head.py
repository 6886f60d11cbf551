"""Contact-state scoring head.

Per hand-object pair: a fused fully-connected branch over (attended, hand,
union) features plus a spatial-attention branch, summed into four logits, one
per contact state. Pair scores for the K objects of one hand are combined by
element-wise max. Contact states are independent labels, not classes: the
loss is a sum of per-state binary cross-entropies, and states annotated
"unsure" are masked out of loss and gradient entirely.
"""

import numpy as np

from . import tensor as T
from .attention import CrossAttention, ParamModule, SpatialAttention, N_STATES
from .backend import kernels
from .errors import ContractError, DimensionError
from .tensor import Tensor

CONTACT_STATES = ("no_contact", "self_contact", "other_person_contact", "object_contact")
YES, NO, UNSURE = "yes", "no", "unsure"
LABEL_VALUES = (YES, NO, UNSURE)


def validate_label(label):
    """A contact label is a 4-tuple over {yes, no, unsure}."""
    if len(label) != N_STATES:
        raise ContractError(f"contact label needs {N_STATES} entries, got {len(label)}")
    for v in label:
        if v not in LABEL_VALUES:
            raise ContractError(f"contact label entry {v!r} not in {LABEL_VALUES}")
    return tuple(label)


def label_targets(label):
    """(targets, mask) float vectors: target 1 for yes, mask 0 for unsure."""
    label = validate_label(label)
    targets = np.array([1.0 if v == YES else 0.0 for v in label])
    mask = np.array([0.0 if v == UNSURE else 1.0 for v in label])
    return targets, mask


class ContactHead(ParamModule):
    """Scores one hand against its K hand-object union maps.

    Either attention branch can be ablated; the fused branch then narrows to
    the remaining feature paths. Embedding width, map count, and norm groups
    are configurable; defaults follow the reference training setup.
    """

    def __init__(self, n, d, embed=1024, n_maps=32, gn_groups=8, use_cross=True,
                 use_spatial=True, learn_norm_affine=True, init_std=0.01, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.n = n
        self.d = d
        self.embed = embed
        self.use_cross = use_cross
        self.use_spatial = use_spatial
        self.cross = (
            CrossAttention(d, gn_groups=gn_groups, learn_norm_affine=learn_norm_affine,
                           init_std=init_std, rng=rng)
            if use_cross else None
        )
        self.spatial = (
            SpatialAttention(d, n_maps=n_maps, init_std=init_std, rng=rng)
            if use_spatial else None
        )

        flat = n * d
        paths = 3 if use_cross else 2
        if use_cross:
            self._fc("fc_pooled", flat, embed, rng)
        self._fc("fc_hand", flat, embed, rng)
        self._fc("fc_union", flat, embed, rng)
        self._fc("fuse_hidden", paths * embed, embed, rng)
        self._fc("fuse_out", embed, N_STATES, rng)

    def _fc(self, name, fan_in, fan_out, rng):
        # He-scaled init; the attention projections keep their own near-zero init
        std = np.sqrt(2.0 / fan_in)
        self._register(name + "_w", rng.normal(0.0, std, (fan_in, fan_out)))
        self._register(name + "_b", np.zeros((1, fan_out)))

    def _dense(self, name, x):
        return T.add(T.matmul(x, self._params[name + "_w"]), self._params[name + "_b"])

    def parameters(self):
        out = list(super().parameters())
        for sub in (self.cross, self.spatial):
            if sub is not None:
                out.extend(sub.parameters())
        return out

    def named_parameters(self):
        out = dict(super().named_parameters())
        for prefix, sub in (("cross", self.cross), ("spatial", self.spatial)):
            if sub is not None:
                for name, p in sub.named_parameters().items():
                    out[f"{prefix}.{name}"] = p
        return out

    def clear_grads(self):
        super().clear_grads()
        for sub in (self.cross, self.spatial):
            if sub is not None:
                sub.clear_grads()

    def config(self):
        return {
            "n": self.n,
            "d": self.d,
            "embed": self.embed,
            "n_maps": self.spatial.n_maps if self.spatial else 0,
            "gn_groups": self.cross.gn_groups if self.cross else 0,
            "use_cross": self.use_cross,
            "use_spatial": self.use_spatial,
        }

    def pair_score(self, hand, union):
        """Four contact logits for one (hand, union) pair, shape (4,)."""
        if hand.shape != (self.n, self.d) or union.shape != (self.n, self.d):
            raise DimensionError(
                f"expected ({self.n}, {self.d}) maps, got {hand.shape} and {union.shape}"
            )
        flat = (1, self.n * self.d)
        feats = []
        if self.use_cross:
            feats.append(T.relu(self._dense("fc_pooled", T.reshape(self.cross.attend(hand, union), flat))))
        feats.append(T.relu(self._dense("fc_hand", T.reshape(hand, flat))))
        feats.append(T.relu(self._dense("fc_union", T.reshape(union, flat))))
        fused = T.relu(self._dense("fuse_hidden", T.concat_lastdim(feats)))
        logits = T.reshape(self._dense("fuse_out", fused), (N_STATES,))
        if self.use_spatial:
            logits = T.add(logits, self.spatial.scores(union))
        return logits

    def score_hand(self, hand, unions):
        """Combined logits over all union maps; an empty list falls back to
        scoring the hand region against itself."""
        if not unions:
            unions = [hand]
        return combine([self.pair_score(hand, u) for u in unions])


def combine(scores):
    """Element-wise max over K per-pair score vectors (K >= 1)."""
    if not scores:
        raise ContractError("combine: need at least one pair score")
    for s in scores:
        if s.shape != (N_STATES,):
            raise DimensionError(f"combine: expected ({N_STATES},) logits, got {s.shape}")
    if len(scores) == 1:
        return scores[0]
    return T.elementwise_max(scores)


def contact_loss(logits, label, weight=1.0):
    """Masked multi-label loss: sum of per-state binary cross-entropies with
    unsure states excluded from loss and gradient."""
    targets, mask = label_targets(label)
    loss = T.bce_with_logits(logits, targets, mask)
    if weight != 1.0:
        loss = T.scale(loss, weight)
    return loss


def predict(logits):
    """Per-state contact probabilities: independent sigmoids of the logits."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    return kernels.sigmoid(data)
