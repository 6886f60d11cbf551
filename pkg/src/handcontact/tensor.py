"""Dense float64 tensors with tape-based reverse-mode differentiation.

Everything is eager: each operation computes its result immediately and, when
an input participates in a gradient, records a closure that maps the output
gradient to the input gradients. backward() walks the recorded graph once in
reverse topological order. Sizes here are desk-scale, so the engine favors
verifiability over throughput (64-bit floats, no batching).

A single graph must only be driven from one thread; tensor values may be
shared read-only.
"""

import numpy as np

from .backend import kernels
from .errors import ConfigurationError, ContractError, DimensionError, NumericError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    # operator sugar for the common compositions
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A named leaf tensor that always tracks gradients."""

    __slots__ = ("name",)

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out_data, (a, b), bw)


def transpose(a):
    if a.data.ndim != 2:
        raise DimensionError(f"transpose: expected 2-d tensor, got {a.shape}")

    def bw(g):
        return (g.T,)

    return _make(a.data.T, (a,), bw)


def reshape(a, shape):
    old = a.data.shape

    def bw(g):
        return (g.reshape(old),)

    return _make(a.data.reshape(shape), (a,), bw)


# ---------------------------------------------------------------------------
# elementwise suite


def add(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"add: shape mismatch {a.shape} vs {b.shape}")

    def bw(g):
        return g, g

    return _make(a.data + b.data, (a, b), bw)


def mul(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"mul: shape mismatch {a.shape} vs {b.shape}")

    def bw(g):
        return g * b.data, g * a.data

    return _make(a.data * b.data, (a, b), bw)


def scale(a, c):
    c = float(c)

    def bw(g):
        return (g * c,)

    return _make(a.data * c, (a,), bw)


def relu(a):
    def bw(g):
        return (kernels.relu_grad(a.data, g),)

    return _make(kernels.relu(a.data), (a,), bw)


def sigmoid(a):
    out_data = kernels.sigmoid(a.data)

    def bw(g):
        return (kernels.sigmoid_grad(out_data, g),)

    return _make(out_data, (a,), bw)


def broadcast_mul(v, m):
    """Scale row i of matrix m by v[i]."""
    if v.data.ndim != 1 or m.data.ndim != 2 or v.shape[0] != m.shape[0]:
        raise DimensionError(f"broadcast_mul: vector {v.shape} over rows of {m.shape}")
    col = v.data[:, None]

    def bw(g):
        return (g * m.data).sum(axis=1), g * col

    return _make(m.data * col, (v, m), bw)


def sum_axis(a, axis):
    def bw(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return _make(a.data.sum(axis=axis), (a,), bw)


def mean_axis(a, axis):
    inv = 1.0 / a.data.shape[axis]

    def bw(g):
        return (np.broadcast_to(np.expand_dims(g * inv, axis), a.data.shape).copy(),)

    return _make(a.data.mean(axis=axis), (a,), bw)


def sum_all(a):
    def bw(g):
        return (np.full(a.data.shape, float(g)),)

    return _make(a.data.sum(), (a,), bw)


def concat_lastdim(tensors):
    if not tensors:
        raise ContractError("concat_lastdim: empty tensor list")
    lead = tensors[0].data.shape[:-1]
    for t in tensors:
        if t.data.shape[:-1] != lead:
            raise DimensionError(
                f"concat_lastdim: leading dims differ: {t.shape} vs {tensors[0].shape}"
            )
    widths = [t.data.shape[-1] for t in tensors]
    edges = np.cumsum([0] + widths)

    def bw(g):
        return tuple(g[..., edges[i] : edges[i + 1]] for i in range(len(widths)))

    return _make(np.concatenate([t.data for t in tensors], axis=-1), tuple(tensors), bw)


def elementwise_max(tensors):
    """Coordinate-wise max of same-shape tensors; gradient goes to the argmax
    (lowest index on ties)."""
    if not tensors:
        raise ContractError("elementwise_max: empty tensor list")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise DimensionError(f"elementwise_max: shape mismatch {t.shape} vs {shape}")
    stacked = np.stack([t.data for t in tensors], axis=0)
    winner = np.argmax(stacked, axis=0)  # first occurrence wins ties

    def bw(g):
        return tuple(np.where(winner == k, g, 0.0) for k in range(len(tensors)))

    return _make(stacked.max(axis=0), tuple(tensors), bw)


def slice_lastdim(a, j0, j1):
    def bw(g):
        ga = np.zeros(a.data.shape)
        ga[..., j0:j1] = g
        return (ga,)

    return _make(a.data[..., j0:j1].copy(), (a,), bw)


def slice_first(a, i):
    def bw(g):
        ga = np.zeros(a.data.shape)
        ga[i] = g
        return (ga,)

    return _make(a.data[i].copy(), (a,), bw)


# ---------------------------------------------------------------------------
# nonlinearities with bespoke kernels


def softmax_lastdim(a):
    if a.data.shape[-1] < 1:
        raise DimensionError("softmax_lastdim: empty last dimension")
    if not np.all(np.isfinite(a.data)):
        raise NumericError("softmax_lastdim: non-finite input")
    out_data = kernels.softmax_rows(a.data)

    def bw(g):
        return (kernels.softmax_rows_grad(out_data, g),)

    return _make(out_data, (a,), bw)


def group_norm(a, groups, scale_p, shift_p, eps=1e-5):
    """Normalize an (n, d) map per channel group, then apply the per-channel
    affine. Statistics: per-channel mean over the n positions, variance pooled
    over the group's positions and channels, so a map that is constant across
    positions normalizes to exactly the shift."""
    if a.data.ndim != 2:
        raise DimensionError(f"group_norm: expected (n, d) input, got {a.shape}")
    n, d = a.data.shape
    if groups < 1 or d % groups != 0:
        raise ConfigurationError(f"group_norm: {d} channels not divisible by {groups} groups")
    if scale_p.shape != (d,) or shift_p.shape != (d,):
        raise DimensionError(
            f"group_norm: affine shapes {scale_p.shape}/{shift_p.shape} do not match {d} channels"
        )
    if eps <= 0:
        raise ConfigurationError("group_norm: eps must be positive")
    out_data, xhat, istd = kernels.group_norm_fwd(a.data, groups, scale_p.data, shift_p.data, eps)

    def bw(g):
        return kernels.group_norm_bwd(g, xhat, istd, scale_p.data, groups)

    return _make(out_data, (a, scale_p, shift_p), bw)


def bce_with_logits(logits, targets, mask=None):
    """Masked sum of per-element binary cross-entropies, as a scalar tensor.

    targets are 0/1 per element; mask entries of 0 remove an element from both
    the loss and the gradient. Stable log-sum-exp form throughout.
    """
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != logits.shape:
        raise DimensionError(f"bce_with_logits: targets {t.shape} vs logits {logits.shape}")
    if mask is None:
        m = np.ones(t.shape)
    else:
        m = np.asarray(mask, dtype=np.float64)
        if m.shape != logits.shape:
            raise DimensionError(f"bce_with_logits: mask {m.shape} vs logits {logits.shape}")
    out_data = kernels.bce_logits(logits.data, t, m)

    def bw(g):
        return (float(g) * kernels.bce_logits_grad(logits.data, t, m),)

    return _make(out_data, (logits,), bw)


# ---------------------------------------------------------------------------
# graph walk and optimization


def _toposort(root):
    # iterative post-order walk; graphs can outgrow the recursion limit
    order = []
    seen = {id(root)}
    stack = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        for p in parents:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append((p, iter(p._parents)))
                break
        else:
            order.append(node)
            stack.pop()
    return order


def backward(loss):
    """Populate grad on every requires_grad tensor reachable from loss.

    Gradients accumulate: running backward twice without clearing doubles
    them. Raises ContractError unless loss is scalar.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
    order = _toposort(loss)
    pending = {id(loss): np.ones(loss.data.shape)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not (p.requires_grad or p._backward is not None):
                continue
            have = pending.get(id(p))
            pending[id(p)] = pg if have is None else have + pg


def sgd_step(params, lr):
    """p <- p - lr * grad for every parameter, then clear the grads."""
    for p in params:
        if p.grad is None:
            raise ContractError(f"sgd_step: parameter {getattr(p, 'name', '?')} has no gradient")
    for p in params:
        p.data = p.data - lr * p.grad
        p.grad = None
