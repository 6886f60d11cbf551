"""SGD training on synthetic feature maps, gradient checking, checkpoints.

The loop is deliberately plain: one sample per step (gradients accumulate
across the batch when batch > 1), a held-out split for plateau detection, and
a times-0.1 learning-rate decay when the held-out loss stops improving.
Everything is seed-pinned; a fixed config reproduces the metric trace
bit-for-bit on one platform and backend.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .attention import CrossAttention, SpatialAttention
from .checkpoint import load_params_into, read_checkpoint, save_params
from .errors import CheckpointError, ConfigurationError, TrainingDivergence
from .head import CONTACT_STATES, ContactHead, NO, UNSURE, YES, contact_loss, predict
from .tensor import Tensor, backward, sgd_step


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch: int = 1
    plateau_patience: int = 500
    plateau_min_delta: float = 1e-4
    lr_decay: float = 0.1
    max_steps: int = 5000
    ablate_cross: bool = False
    ablate_spatial: bool = False
    loss_weight: float = 1.0
    embed: int = 128
    n_maps: int = 32
    gn_groups: int = 8
    holdout_fraction: float = 0.1
    eval_every: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError("learning rate must be positive")
        if not 0.0 < self.lr_decay < 1.0:
            raise ConfigurationError("lr_decay must lie in (0, 1)")
        if self.batch < 1:
            raise ConfigurationError("batch size must be at least 1")


def build_head(n, d, config):
    return ContactHead(
        n, d,
        embed=config.embed,
        n_maps=config.n_maps,
        gn_groups=config.gn_groups,
        use_cross=not config.ablate_cross,
        use_spatial=not config.ablate_spatial,
        seed=config.seed,
    )


def split_dataset(samples, fraction, seed):
    """Seed-pinned shuffle split into (train, heldout)."""
    order = np.random.default_rng(seed).permutation(len(samples))
    n_hold = max(1, int(round(fraction * len(samples)))) if len(samples) > 1 else 0
    hold_idx = set(order[:n_hold].tolist())
    train = [samples[i] for i in order if i not in hold_idx]
    hold = [samples[i] for i in sorted(hold_idx)]
    return train, hold


def sample_logits(model, sample):
    hand = Tensor(sample.hand)
    unions = [Tensor(u) for u in sample.unions]
    return model.score_hand(hand, unions)


def evaluate_heldout(model, samples):
    """(mean masked loss, per-state accuracy) on a held-out set. States with
    no usable (non-unsure) labels report accuracy None."""
    total_loss = 0.0
    correct = [0] * len(CONTACT_STATES)
    counted = [0] * len(CONTACT_STATES)
    for sample in samples:
        logits = sample_logits(model, sample)
        total_loss += contact_loss(logits, sample.label).item()
        probs = predict(logits)
        for s, lab in enumerate(sample.label):
            if lab == UNSURE:
                continue
            counted[s] += 1
            if (probs[s] > 0.5) == (lab == YES):
                correct[s] += 1
    acc = [correct[s] / counted[s] if counted[s] else None for s in range(len(CONTACT_STATES))]
    return total_loss / max(1, len(samples)), acc


def train(dataset, config, checkpoint_path=None, trace_path=None):
    """Run SGD per the config; returns (model, trace).

    The trace has one record per step ("step", "loss", "lr"), with held-out
    loss and per-state accuracy attached at evaluation points. Raises
    TrainingDivergence when the loss goes non-finite.
    """
    if not dataset:
        raise ConfigurationError("train: empty dataset")
    n, d = dataset[0].hand.shape
    model = build_head(n, d, config)
    train_set, holdout = split_dataset(dataset, config.holdout_fraction, config.seed)
    if not train_set:
        train_set = list(dataset)
    order_rng = np.random.default_rng(config.seed + 1)

    lr = config.lr
    best_hold = np.inf
    steps_since_improve = 0
    trace = []
    order = []
    cursor = 0

    for step in range(config.max_steps):
        batch_loss = 0.0
        for _ in range(config.batch):
            if cursor >= len(order):
                order = order_rng.permutation(len(train_set)).tolist()
                cursor = 0
            sample = train_set[order[cursor]]
            cursor += 1
            logits = sample_logits(model, sample)
            loss = contact_loss(logits, sample.label, weight=config.loss_weight)
            if config.batch > 1:
                loss = T.scale(loss, 1.0 / config.batch)
            backward(loss)
            batch_loss += loss.item()
        if not np.isfinite(batch_loss):
            raise TrainingDivergence(step)
        sgd_step(model.parameters(), lr)
        model.clear_grads()  # frozen tensors may still hold gradients

        entry = {"step": step, "loss": batch_loss, "lr": lr}
        if holdout and (step + 1) % config.eval_every == 0:
            hold_loss, hold_acc = evaluate_heldout(model, holdout)
            entry["holdout_loss"] = hold_loss
            entry["holdout_acc"] = hold_acc
            if best_hold - hold_loss > config.plateau_min_delta:
                best_hold = hold_loss
                steps_since_improve = 0
            else:
                steps_since_improve += config.eval_every
                if steps_since_improve >= config.plateau_patience:
                    lr *= config.lr_decay
                    steps_since_improve = 0
        trace.append(entry)

    if checkpoint_path:
        save_params(checkpoint_path, model.named_parameters(),
                    config={"model": model.config(), "train": asdict(config)})
    if trace_path:
        with open(trace_path, "w") as fh:
            for entry in trace:
                fh.write(json.dumps(entry) + "\n")
    return model, trace


def load_head(path):
    """Rebuild a ContactHead from a checkpoint written by train()."""
    config, _ = read_checkpoint(path)
    mc = config.get("model")
    if not mc:
        raise CheckpointError(f"{path}: checkpoint carries no model config")
    model = ContactHead(
        mc["n"], mc["d"],
        embed=mc["embed"],
        n_maps=mc["n_maps"] or 32,
        gn_groups=mc["gn_groups"] or 8,
        use_cross=mc["use_cross"],
        use_spatial=mc["use_spatial"],
    )
    load_params_into(path, model.named_parameters())
    return model


# ---------------------------------------------------------------------------
# gradient checking


def numeric_gradient(f, tensor, step=1e-5):
    """Central-difference gradient of scalar f() w.r.t. every element."""
    flat = tensor.data.ravel()
    grad = np.zeros(flat.shape)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        hi = f()
        flat[i] = keep - step
        lo = f()
        flat[i] = keep
        grad[i] = (hi - lo) / (2.0 * step)
    return grad.reshape(tensor.data.shape)


def relative_error(analytic, numeric):
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / denom


def _check_case(loss_fn, tensors, step):
    """Max relative error per named tensor for one fixture."""
    loss = loss_fn()
    backward(loss)
    out = {}
    for name, t in tensors.items():
        analytic = t.grad.copy() if t.grad is not None else np.zeros(t.data.shape)
        numeric = numeric_gradient(lambda: loss_fn().item(), t, step)
        out[name] = float(relative_error(analytic, numeric).max())
        t.grad = None
    return out


def _fixtures(module, seed):
    rng = np.random.default_rng(seed)
    n, d, L, embed = 4, 8, 3, 8

    def rt(*shape):
        return Tensor(rng.normal(0.0, 1.0, shape), requires_grad=True)

    if module == "matmul":
        a, b = rt(n, d), rt(d, L)
        r = rng.normal(0.0, 1.0, (n, L))
        return lambda: T.sum_all(T.mul(T.matmul(a, b), Tensor(r))), {"a": a, "b": b}
    if module == "softmax":
        x = rt(2, 5)
        r = rng.normal(0.0, 1.0, (2, 5))
        return lambda: T.sum_all(T.mul(T.softmax_lastdim(x), Tensor(r))), {"x": x}
    if module == "group_norm":
        x, scale, shift = rt(n, d), rt(d), rt(d)
        r = rng.normal(0.0, 1.0, (n, d))
        return (
            lambda: T.sum_all(T.mul(T.group_norm(x, 2, scale, shift), Tensor(r))),
            {"x": x, "scale": scale, "shift": shift},
        )
    if module == "cross_attend":
        mod = CrossAttention(d, gn_groups=2, rng=rng)
        hand, union = rt(n, d), rt(n, d)
        r = rng.normal(0.0, 1.0, (n, d))
        tensors = {"hand": hand, "union": union}
        tensors.update(mod.named_parameters())
        return lambda: T.sum_all(T.mul(mod.attend(hand, union), Tensor(r))), tensors
    if module == "spatial_scores":
        mod = SpatialAttention(d, n_maps=L, rng=rng)
        union = rt(n, d)
        r = rng.normal(0.0, 1.0, (4,))
        tensors = {"union": union}
        tensors.update(mod.named_parameters())
        return lambda: T.sum_all(T.mul(mod.scores(union), Tensor(r))), tensors
    if module == "pair_score":
        model = ContactHead(n, d, embed=embed, n_maps=L, gn_groups=2, seed=seed)
        hand, union = rt(n, d), rt(n, d)
        label = (YES, UNSURE, NO, YES)
        tensors = {"hand": hand, "union": union}
        tensors.update(model.named_parameters())
        return lambda: contact_loss(model.pair_score(hand, union), label), tensors
    if module == "contact_loss":
        logits = rt(4)
        label = (YES, UNSURE, NO, UNSURE)
        return lambda: contact_loss(logits, label), {"logits": logits}
    raise ConfigurationError(f"unknown gradcheck module {module!r}")


GRADCHECK_MODULES = (
    "matmul",
    "softmax",
    "group_norm",
    "cross_attend",
    "spatial_scores",
    "pair_score",
    "contact_loss",
)


def grad_check(modules=GRADCHECK_MODULES, trials=5, tolerance=1e-4, step=1e-5, seed=0):
    """Compare analytic gradients against central differences.

    Returns a report dict with per-module worst errors and a list of failures
    (module, tensor, error) exceeding the tolerance.
    """
    if tolerance <= 0:
        raise ConfigurationError("gradcheck tolerance must be positive")
    report = {"tolerance": tolerance, "modules": {}, "failures": []}
    for module in modules:
        worst = {}
        for trial in range(trials):
            loss_fn, tensors = _fixtures(module, seed + trial)
            errs = _check_case(loss_fn, tensors, step)
            for name, err in errs.items():
                worst[name] = max(worst.get(name, 0.0), err)
        max_err = max(worst.values())
        report["modules"][module] = {
            "max_rel_err": max_err,
            "tensors": worst,
            "checked": len(worst),
        }
        for name, err in worst.items():
            if err >= tolerance:
                report["failures"].append({"module": module, "tensor": name, "rel_err": err})
    report["passed"] = not report["failures"]
    return report
