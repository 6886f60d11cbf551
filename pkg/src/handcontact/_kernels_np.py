"""NumPy implementations of the numeric kernels.

Reference semantics for the compiled extension: handcontact._speedups must
match these functions to float64 round-off. All inputs are C-contiguous
float64 arrays; callers guarantee shapes.
"""

import numpy as np

NAME = "numpy"


def softmax_rows(x):
    # max-subtraction keeps exp() from overflowing
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_grad(y, gy):
    dot = (gy * y).sum(axis=-1, keepdims=True)
    return y * (gy - dot)


def group_norm_fwd(x, groups, gamma, beta, eps):
    """Normalize an (n, d) map: per-channel mean over the n positions,
    per-group variance over positions and the group's channels.

    Zero spatial variance therefore collapses to zero output (before the
    affine shift), which makes the attention residual exactly the identity
    when the pooled term is constant across positions.

    Returns (y, xhat, istd) with istd of shape (groups,).
    """
    n, d = x.shape
    dg = d // groups
    mu = x.mean(axis=0)
    r = x - mu
    var = (r * r).reshape(n, groups, dg).mean(axis=(0, 2))
    istd = 1.0 / np.sqrt(var + eps)
    istd_c = np.repeat(istd, dg)
    xhat = r * istd_c
    return xhat * gamma + beta, xhat, istd


def group_norm_bwd(gy, xhat, istd, gamma, groups):
    n, d = gy.shape
    dg = d // groups
    gbeta = gy.sum(axis=0)
    ggamma = (gy * xhat).sum(axis=0)
    gxh = gy * gamma
    m2 = (gxh * xhat).reshape(n, groups, dg).mean(axis=(0, 2))
    gr = (gxh - xhat * np.repeat(m2, dg)) * np.repeat(istd, dg)
    gx = gr - gr.mean(axis=0)
    return gx, ggamma, gbeta


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_grad(y, gy):
    return gy * y * (1.0 - y)


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x, gy):
    return np.where(x > 0.0, gy, 0.0)


def bce_logits(x, t, mask):
    """Sum of masked binary cross-entropies in log-sum-exp form:
    max(x,0) - x*t + log1p(exp(-|x|))."""
    per = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    return float((per * mask).sum())


def bce_logits_grad(x, t, mask):
    return (sigmoid(x) - t) * mask
