"""The two attention mechanisms of the contact head.

Feature maps are (n, d) tensors: n spatial locations (flattened h*w grid,
row-major) by d channels. The hand map and every hand-object union map fed to
one head share the same (n, d).
"""

import numpy as np

from . import tensor as T
from .errors import ConfigurationError, DimensionError
from .tensor import Parameter

INIT_STD = 0.01
DEFAULT_GROUPS = 8
DEFAULT_MAPS = 32
N_STATES = 4


class ParamModule:
    """Base for parameter-owning modules: named registry, one entry per tensor."""

    def __init__(self):
        self._params = {}
        self._frozen = set()

    def _register(self, name, array, frozen=False):
        if name in self._params:
            raise ConfigurationError(f"parameter {name!r} registered twice")
        p = Parameter(np.asarray(array, dtype=np.float64), name)
        self._params[name] = p
        if frozen:
            self._frozen.add(name)
        return p

    def parameters(self):
        """Trainable parameters, registration order."""
        return [p for name, p in self._params.items() if name not in self._frozen]

    def named_parameters(self):
        """All parameters including frozen ones, for checkpoints."""
        return dict(self._params)

    def clear_grads(self):
        for p in self._params.values():
            p.grad = None


def _check_pair(hand, union, d):
    if hand.data.ndim != 2 or union.data.ndim != 2:
        raise DimensionError(
            f"feature maps must be (n, d): got {hand.shape} and {union.shape}"
        )
    if hand.shape != union.shape:
        raise DimensionError(f"hand map {hand.shape} vs union map {union.shape}")
    if hand.shape[1] != d:
        raise DimensionError(f"feature maps have {hand.shape[1]} channels, module expects {d}")


class CrossAttention(ParamModule):
    """Affinity-based pooling of union features onto the hand map.

    Each hand location p receives a convex combination of all union locations,
    weighted by softmax over learned pairwise affinities. The pooled term is
    group-normalized and added back onto the hand features, so with near-zero
    projections the module starts as the identity.
    """

    def __init__(self, d, gn_groups=DEFAULT_GROUPS, gn_eps=1e-5, init_std=INIT_STD,
                 learn_norm_affine=True, rng=None):
        super().__init__()
        if d % gn_groups != 0:
            raise ConfigurationError(f"{d} channels not divisible by {gn_groups} norm groups")
        rng = rng or np.random.default_rng(0)
        self.d = d
        self.gn_groups = gn_groups
        self.gn_eps = gn_eps
        self.hand_proj = self._register("hand_proj", rng.normal(0.0, init_std, (d, d)))
        self.union_proj = self._register("union_proj", rng.normal(0.0, init_std, (d, d)))
        self.norm_scale = self._register("norm_scale", np.ones(d), frozen=not learn_norm_affine)
        self.norm_shift = self._register("norm_shift", np.zeros(d), frozen=not learn_norm_affine)

    def affinity(self, hand, union):
        """Pairwise affinity matrix (n, n): entry (p, q) is the dot product of
        projected hand location p with projected union location q."""
        _check_pair(hand, union, self.d)
        return T.matmul(T.matmul(hand, self.hand_proj), T.transpose(T.matmul(union, self.union_proj)))

    def attend(self, hand, union):
        """hand + groupnorm(softmax(affinity) @ union), shape (n, d)."""
        weights = T.softmax_lastdim(self.affinity(hand, union))
        pooled = T.matmul(weights, union)
        normed = T.group_norm(pooled, self.gn_groups, self.norm_scale, self.norm_shift, self.gn_eps)
        return T.add(hand, normed)

    __call__ = attend


class SpatialAttention(ParamModule):
    """L learned probability maps over union locations, each scoring the map
    into a 4-vector; the module output is the average of the L score vectors.
    """

    def __init__(self, d, n_maps=DEFAULT_MAPS, init_std=INIT_STD, rng=None):
        super().__init__()
        if n_maps < 1:
            raise ConfigurationError("need at least one attention map")
        rng = rng or np.random.default_rng(0)
        self.d = d
        self.n_maps = n_maps
        self.map_weights = self._register("map_weights", rng.normal(0.0, init_std, (d, n_maps)))
        # contiguous (L, d, 4) stack, sliced per map during evaluation
        self.score_weights = self._register(
            "score_weights", rng.normal(0.0, init_std, (n_maps, d, N_STATES))
        )

    def _map_rows(self, union):
        # one (n,) probability vector per map: softmax over locations
        rows = []
        for l in range(self.n_maps):
            col = T.slice_lastdim(self.map_weights, l, l + 1)  # (d, 1)
            logits = T.reshape(T.matmul(union, col), (1, -1))  # (1, n)
            rows.append(T.reshape(T.softmax_lastdim(logits), (-1,)))
        return rows

    def maps(self, union):
        """Stacked attention maps, shape (n, L); column l sums to 1."""
        if union.data.ndim != 2 or union.shape[1] != self.d:
            raise DimensionError(f"union map {union.shape} does not match {self.d} channels")
        cols = [T.reshape(row, (-1, 1)) for row in self._map_rows(union)]
        return T.concat_lastdim(cols)

    def scores(self, union):
        """Attention-weighted contact scores, shape (4,): for each map,
        per-location score vectors are weighted by the map and summed over
        locations; results are averaged over maps."""
        if union.data.ndim != 2 or union.shape[1] != self.d:
            raise DimensionError(f"union map {union.shape} does not match {self.d} channels")
        total = None
        for l, row in enumerate(self._map_rows(union)):
            per_loc = T.matmul(union, T.slice_first(self.score_weights, l))  # (n, 4)
            weighted = T.broadcast_mul(row, per_loc)
            t_l = T.sum_axis(weighted, 0)
            total = t_l if total is None else T.add(total, t_l)
        return T.scale(total, 1.0 / self.n_maps)

    __call__ = scores
