"""Command-line surface.

Subcommands: gradcheck, gen, train, infer, eval, stats, baseline. Every
command is deterministic given its flags (plus optional --config file, which
supplies defaults that explicit flags override). The effective configuration
is echoed as the first output line for reproducibility. Set HANDCONTACT_LOG
to debug/info/warning to control verbosity.

Exit codes: 0 success, 1 check or metric failure, 2 usage or schema error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import formats
from .backend import backend_name
from .baseline import FEATURE_DIM, hand_feature, train_baseline
from .errors import (CheckpointError, ConfigurationError, ContractError, EvaluationError,
                     FileFormatError, IngestionError, TrainingDivergence)
from .evaluation import DetectionRecord, evaluate
from .geometry import AxisBox, dataset_stats, envelope
from .head import CONTACT_STATES, combine, predict
from .synthetic import SyntheticSpec, generate
from .tensor import Tensor
from .training import (GRADCHECK_MODULES, TrainConfig, evaluate_heldout, grad_check,
                       load_head, train)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
log = logging.getLogger("handcontact")


def _echo_config(args):
    effective = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    effective["backend"] = backend_name()
    print(json.dumps({"config": effective}, default=str))


def _add_synthetic_flags(p):
    p.add_argument("--n", type=int, default=16, help="spatial locations per map")
    p.add_argument("--d", type=int, default=32, help="channels per map")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=3)
    p.add_argument("--rule", default="markers")
    p.add_argument("--noise-std", type=float, default=0.25)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)


def _spec_from_args(args):
    return SyntheticSpec(n=args.n, d=args.d, k_min=args.k_min, k_max=args.k_max,
                         rule=args.rule, noise_std=args.noise_std, seed=args.seed,
                         count=args.count)


def _add_train_flags(p):
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--max-steps", type=int, default=5000)
    p.add_argument("--plateau-patience", type=int, default=500)
    p.add_argument("--plateau-min-delta", type=float, default=1e-4)
    p.add_argument("--lr-decay", type=float, default=0.1)
    p.add_argument("--loss-weight", type=float, default=1.0,
                   help="weight of the contact loss term")
    p.add_argument("--embed", type=int, default=128)
    p.add_argument("--n-maps", type=int, default=32)
    p.add_argument("--gn-groups", type=int, default=8)
    p.add_argument("--holdout-fraction", type=float, default=0.1)
    p.add_argument("--eval-every", type=int, default=250)
    p.add_argument("--ablate-cross", action="store_true")
    p.add_argument("--ablate-spatial", action="store_true")


def _train_config(args):
    return TrainConfig(
        lr=args.lr, batch=args.batch, max_steps=args.max_steps,
        plateau_patience=args.plateau_patience, plateau_min_delta=args.plateau_min_delta,
        lr_decay=args.lr_decay, loss_weight=args.loss_weight, embed=args.embed,
        n_maps=args.n_maps, gn_groups=args.gn_groups,
        holdout_fraction=args.holdout_fraction, eval_every=args.eval_every,
        ablate_cross=args.ablate_cross, ablate_spatial=args.ablate_spatial,
        seed=args.seed,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_gradcheck(args):
    _echo_config(args)
    modules = args.modules.split(",") if args.modules else list(GRADCHECK_MODULES)
    report = grad_check(modules=modules, trials=args.trials,
                        tolerance=args.tolerance, seed=args.seed)
    for module, info in report["modules"].items():
        status = "ok" if info["max_rel_err"] < args.tolerance else "FAIL"
        print(f"{status} {module}: max rel err {info['max_rel_err']:.3e} "
              f"over {info['checked']} tensors")
    for failure in report["failures"]:
        print(f"FAIL {failure['module']}.{failure['tensor']}: rel err {failure['rel_err']:.3e}",
              file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_gen(args):
    _echo_config(args)
    samples = generate(_spec_from_args(args))
    formats.write_features(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args):
    _echo_config(args)
    if args.data:
        entries = formats.read_features(args.data)
        samples = [e["sample"] for e in entries]
        for e, s in zip(entries, samples):
            if s.label is None:
                raise IngestionError(f"{e['image_id']}: training data needs labels")
    else:
        samples = generate(_spec_from_args(args))
    model, trace = train(samples, _train_config(args),
                         checkpoint_path=args.checkpoint, trace_path=args.trace)
    tail = [t["loss"] for t in trace[-100:]]
    summary = {"steps": len(trace), "final_lr": trace[-1]["lr"],
               "trailing_loss": float(np.mean(tail))}
    hold = [t for t in trace if "holdout_acc" in t]
    if hold:
        summary["holdout_loss"] = hold[-1]["holdout_loss"]
        summary["holdout_acc"] = hold[-1]["holdout_acc"]
    print(json.dumps(summary))
    return EXIT_OK


def cmd_infer(args):
    _echo_config(args)
    model = load_head(args.checkpoint)
    if args.ablate_spatial:
        model.use_spatial = False  # runtime switch: drop the spatial-score term
    entries = formats.read_features(args.data)
    detections = []
    for e in entries:
        sample = e["sample"]
        logits = model.score_hand(Tensor(sample.hand), [Tensor(u) for u in sample.unions])
        probs = predict(logits)
        box = e["box"] if e["box"] is not None else AxisBox(0.0, 0.0, 1.0, 1.0)
        detections.append(DetectionRecord(
            image_id=e["image_id"], box=box, det_score=e["det_score"],
            contact_probs=tuple(float(p) for p in probs),
        ))
    formats.write_detections(args.out, detections)
    print(f"wrote {len(detections)} detections to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    _echo_config(args)
    detections = formats.read_detections(args.detections)
    records = formats.read_annotations(args.annotations)
    result = evaluate(detections, records)
    for state in CONTACT_STATES:
        ap = result["per_state"][state]["ap"]
        shown = "undefined" if ap is None else f"{ap:.4f}"
        print(f"AP[{state}] = {shown} ({result['per_state'][state]['n_gt']} ground truths)")
    print(f"mAP = {result['map']:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(result, fh)
    if args.plot:
        _write_pr_plot(result, args.plot)
    return EXIT_OK


def _write_pr_plot(result, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigurationError("--plot requires matplotlib")
    fig, ax = plt.subplots()
    for state in CONTACT_STATES:
        entry = result["per_state"][state]
        if entry["recalls"]:
            ax.plot(entry["recalls"], entry["precisions"], label=state)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def cmd_stats(args):
    _echo_config(args)
    records = formats.read_annotations(args.annotations)
    stats = dataset_stats(records)
    print(json.dumps(stats))
    return EXIT_OK


def cmd_baseline(args):
    _echo_config(args)
    records = formats.read_annotations(args.annotations)
    poses = formats.read_keypoints(args.keypoints)
    examples, dump = [], []
    skipped = 0
    for rec in records:
        image_poses = poses.get(rec.image_id, [])
        for hand in rec.hands:
            box = envelope(hand.quad)
            feature = (
                hand_feature(box, image_poses, rec.objects, rec.width, rec.height)
                if image_poses else None
            )
            if feature is None:
                skipped += 1
                continue
            examples.append((feature, hand.contact))
            dump.append({"image_id": rec.image_id, "feature": feature.tolist()})
    if args.dump_features:
        with open(args.dump_features, "w") as fh:
            for row in dump:
                fh.write(json.dumps(row) + "\n")
        print(f"wrote {len(dump)} feature rows ({FEATURE_DIM} values each)")
    if not examples:
        print("no usable hands (no visible wrists); nothing to train", file=sys.stderr)
        return EXIT_FAIL
    model = train_baseline(examples, lr=args.lr, steps=args.steps)
    log.info("trained on %d hands, skipped %d without visible wrists", len(examples), skipped)

    eval_records = formats.read_annotations(args.eval_annotations) if args.eval_annotations else records
    eval_poses = formats.read_keypoints(args.eval_keypoints) if args.eval_keypoints else poses
    detections = []
    for rec in eval_records:
        image_poses = eval_poses.get(rec.image_id, [])
        for hand in rec.hands:
            box = envelope(hand.quad)
            feature = (
                hand_feature(box, image_poses, rec.objects, rec.width, rec.height)
                if image_poses else None
            )
            if feature is None:
                continue
            probs = model.predict(feature)
            detections.append(DetectionRecord(
                image_id=rec.image_id, box=box, det_score=1.0,
                contact_probs=tuple(float(p) for p in probs),
            ))
    result = evaluate(detections, eval_records)
    for state in CONTACT_STATES:
        ap = result["per_state"][state]["ap"]
        shown = "undefined" if ap is None else f"{ap:.4f}"
        print(f"AP[{state}] = {shown}")
    print(f"mAP = {result['map']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="handcontact",
        description="Hand contact-state recognition head: training, inference, evaluation.",
    )
    parser.add_argument("--config", help="JSON file of flag defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--modules", help=f"comma-separated subset of {','.join(GRADCHECK_MODULES)}")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("gen", help="generate a planted-rule synthetic dataset")
    _add_synthetic_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the contact head")
    _add_synthetic_flags(p)
    _add_train_flags(p)
    p.add_argument("--data", help="feature file (default: generate synthetically)")
    p.add_argument("--checkpoint", help="write final parameters here")
    p.add_argument("--trace", help="write per-step metric trace here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="score a feature file with a trained checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ablate-spatial", action="store_true",
                   help="drop the spatial-attention score term at inference")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="joint detection + contact average precision")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", help="write the JSON summary here")
    p.add_argument("--plot", help="write a PR-curve plot here (requires matplotlib)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-state yes/no/unsure tallies of an annotation file")
    p.add_argument("--annotations", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("baseline", help="train/evaluate the pose-heuristic baseline")
    p.add_argument("--annotations", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--eval-annotations")
    p.add_argument("--eval-keypoints")
    p.add_argument("--dump-features")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=2000)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("HANDCONTACT_LOG", "warning").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        known = set()
        for action in parser._actions:
            known.add(action.dest)
            if isinstance(action, argparse._SubParsersAction):
                for sp in action.choices.values():
                    known |= {a.dest for a in sp._actions}
        unknown = set(defaults) - known
        if unknown:
            print(f"error: unknown config keys: {sorted(unknown)}", file=sys.stderr)
            return EXIT_USAGE
        parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileFormatError, IngestionError, CheckpointError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, ContractError, TrainingDivergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
