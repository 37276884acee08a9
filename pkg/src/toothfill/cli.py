"""Command-line entry points: gen-data, train, complete, eval.

Thin wrappers over the library; every run writes its configuration to
config.json in the output directory.  Exit codes: 0 success, 2 bad
arguments (argparse), 3 runtime failure with a machine-readable error
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ToothfillError
from .evaluation import InferConfig, evaluate_pair, run_ablation
from .geometry.mesh import load_obj
from .geometry.sdf import Polygon2D, read_sdf_samples, sample_sdf_2d
from .inference import (
    CompletionJob,
    StopRule,
    extract_completed_mesh,
    post_deform,
    project_to_latent,
    write_bundle,
)
from .model import load_checkpoint, save_checkpoint
from .synthcorpus import CorpusManifest, build_corpus, crown_supervision_samples
from .training import (
    TrainConfig,
    load_training_shapes,
    optimize_partial_code,
    train_autodecoder,
    train_discriminator,
)


def _write_config(out_dir: Path, command: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump({"command": command, **payload}, fh, indent=1, sort_keys=True)


def cmd_gen_data(args) -> int:
    split = tuple(int(x) for x in args.split.split(","))
    out = Path(args.out)
    _write_config(out, "gen-data", {"shapes": args.shapes, "seed": args.seed,
                                    "split": list(split), "cut_fraction": args.cut_fraction})
    build_corpus(args.shapes, args.seed, out, split=split,
                 subdivisions=args.subdivisions, cut_fraction=args.cut_fraction)
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    manifest = CorpusManifest.load(Path(args.corpus) / "manifest.json")
    cfg = TrainConfig(epochs=args.epochs, lr_params=args.lr_params,
                      lr_codes=args.lr_codes, lam=args.lam, batch=args.batch,
                      seed=args.seed, hidden=args.width, code_dim=args.code_dim,
                      use_2d=not args.no_2d, target_l3d=args.target_l3d,
                      telemetry=str(out / "telemetry.csv"))
    _write_config(out, "train", {"corpus": str(args.corpus), **asdict(cfg)})
    shapes = load_training_shapes(manifest)
    ckpt = train_autodecoder(shapes, cfg)

    partial_codes = []
    for i, shape in enumerate(shapes):
        partial_codes.append(optimize_partial_code(
            ckpt, (shape.partial_points, shape.partial_values), None,
            iters=args.partial_iters, lr=args.code_lr, seed=cfg.seed * 7919 + i))
    disc = train_discriminator(ckpt.codes_matrix(), np.stack(partial_codes, axis=0),
                               epochs=args.disc_epochs, lr=args.disc_lr,
                               seed=cfg.seed + 131, config=ckpt.config)
    ckpt.discriminator = disc
    save_checkpoint(ckpt, out / "ckpt.tinp")
    np.save(out / "partial_codes.npy", np.stack(partial_codes, axis=0))
    return 0


def cmd_complete(args) -> int:
    out = Path(args.out)
    ckpt = load_checkpoint(args.ckpt)
    rule = StopRule(tau_d=args.tau_d, patience=args.patience, max_iters=args.max_iters)
    payload = {"ckpt": str(args.ckpt), "seed": args.seed, "resolution": args.resolution,
               "tau_d": rule.tau_d, "patience": rule.patience, "max_iters": rule.max_iters,
               "lr": args.lr, "match_radius": args.match_radius,
               "no_2d": args.no_2d, "no_adv": args.no_adv, "no_deform": args.no_deform}

    if args.shape_id:
        manifest = CorpusManifest.load(Path(args.corpus) / "manifest.json")
        crown = load_obj(manifest.path(args.shape_id, "crown"))
        pp, vp = read_sdf_samples(manifest.path(args.shape_id, "partial3d"))
        p2, v2 = read_sdf_samples(manifest.path(args.shape_id, "full2d"))
        payload["shape_id"] = args.shape_id
    else:
        if not args.crown:
            raise ToothfillError("need --shape-id with --corpus, or --crown (+ --contour)")
        crown = load_obj(args.crown)
        pp, vp = crown_supervision_samples(crown, 1200, 150, 0.05, seed=args.seed)
        if args.contour:
            with open(args.contour, "r", encoding="utf-8") as fh:
                poly = Polygon2D(np.asarray(json.load(fh), dtype=np.float64))
            p2, v2 = sample_sdf_2d(poly, 600, 200, 0.05, seed=args.seed + 1)
        else:
            p2 = v2 = None
        payload["crown"] = str(args.crown)

    job = CompletionJob(crown_mesh=crown, partial_points=pp, partial_values=vp, seed=args.seed)
    use_2d = not args.no_2d and p2 is not None
    if use_2d:
        job.contour_points = p2
        job.contour_values = v2
    _write_config(out, "complete", payload)

    code = project_to_latent(ckpt, None if args.no_adv else ckpt.discriminator,
                             job, rule, lr=args.lr, use_2d=use_2d,
                             use_adv=not args.no_adv)
    pre = extract_completed_mesh(ckpt, code, resolution=args.resolution)
    final = pre
    if not args.no_deform:
        final, _ = post_deform(pre, crown, match_radius=args.match_radius)
    write_bundle(out, job, pre, final, payload)
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    if args.pred and args.gt:
        cd, hd, asd = evaluate_pair(load_obj(args.pred), load_obj(args.gt),
                                    n_samples=args.metric_samples, seed=args.seed)
        _write_config(out, "eval", {"pred": args.pred, "gt": args.gt,
                                    "cd": cd, "hd": hd, "asd": asd})
        print(f"cd={cd!r} hd={hd!r} asd={asd!r}")
        return 0
    manifest = CorpusManifest.load(Path(args.corpus) / "manifest.json")
    train_cfg = TrainConfig(epochs=args.epochs, batch=args.batch, hidden=args.width,
                            code_dim=args.code_dim, seed=args.seed)
    infer_cfg = InferConfig(
        stop=StopRule(tau_d=args.tau_d, patience=args.patience, max_iters=args.max_iters),
        resolution=args.resolution, n_metric_samples=args.metric_samples)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    _write_config(out, "eval", {"corpus": str(args.corpus), "seeds": list(seeds),
                                **asdict(train_cfg)})
    table = run_ablation(manifest, train_cfg, infer_cfg, seeds=seeds, out_dir=out)
    for row in table:
        print(f"{row.variant}: cd={row.cd:.4f} hd={row.hd:.4f} asd={row.asd:.4f} "
              f"fails={row.n_fail}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toothfill",
                                     description="latent-space tooth completion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="build a synthetic corpus")
    p.add_argument("--shapes", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="16,2,6")
    p.add_argument("--subdivisions", type=int, default=4)
    p.add_argument("--cut-fraction", type=float, default=0.55, dest="cut_fraction")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the auto-decoder and discriminator")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--code-dim", type=int, default=256, dest="code_dim")
    p.add_argument("--batch", type=int, default=4096)
    p.add_argument("--lr-params", type=float, default=1e-4, dest="lr_params")
    p.add_argument("--lr-codes", type=float, default=1e-3, dest="lr_codes")
    p.add_argument("--lam", type=float, default=1e-4)
    p.add_argument("--target-l3d", type=float, default=None, dest="target_l3d")
    p.add_argument("--no-2d", action="store_true", dest="no_2d")
    p.add_argument("--partial-iters", type=int, default=300, dest="partial_iters")
    p.add_argument("--code-lr", type=float, default=5e-3, dest="code_lr")
    p.add_argument("--disc-epochs", type=int, default=400, dest="disc_epochs")
    p.add_argument("--disc-lr", type=float, default=1e-3, dest="disc_lr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("complete", help="complete a partial crown")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus")
    p.add_argument("--shape-id", dest="shape_id")
    p.add_argument("--crown")
    p.add_argument("--contour")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--tau-d", type=float, default=0.1, dest="tau_d")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=800, dest="max_iters")
    p.add_argument("--match-radius", type=float, default=0.02, dest="match_radius")
    p.add_argument("--no-2d", action="store_true", dest="no_2d")
    p.add_argument("--no-adv", action="store_true", dest="no_adv")
    p.add_argument("--no-deform", action="store_true", dest="no_deform")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("eval", help="pairwise metrics or the ablation table")
    p.add_argument("--out", required=True)
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", default="0")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--code-dim", type=int, default=64, dest="code_dim")
    p.add_argument("--batch", type=int, default=2048)
    p.add_argument("--resolution", type=int, default=48)
    p.add_argument("--tau-d", type=float, default=0.1, dest="tau_d")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=800, dest="max_iters")
    p.add_argument("--metric-samples", type=int, default=30000, dest="metric_samples")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToothfillError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
