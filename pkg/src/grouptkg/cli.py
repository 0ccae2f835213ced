"""Command-line entry point: ``train``, ``eval``, ``predict``, ``stats``, ``synth``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config
from .data import dataset_stats, load_dataset, save_dataset, synth_periodic_tkg
from .metrics import format_report, write_report
from .model import forward_predict
from .training import evaluate, train


def _load(args):
    return load_dataset(args.data_dir, granularity=args.granularity)


def cmd_train(args) -> int:
    ds = _load(args)
    config = Config(
        n_groups=args.groups, window=args.window, n_layers=args.layers, dim=args.dim,
        batch_size=args.batch, lr_default=args.lr, lr_mapper=args.lr_mapper,
        patience=args.patience, max_epochs=args.max_epochs, seed=args.seed,
        group_pathway=not args.no_group_pathway, filtered_eval=args.filtered,
        composition=args.composition, corr_reduce=args.corr_reduce,
    )
    ckpt = train(config, ds)
    save_checkpoint(ckpt, args.out)
    print(f"best epoch {ckpt.epoch}  valid loss {ckpt.best_val_loss:.5f}  -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    ds = _load(args)
    report = evaluate(ckpt, ds, args.split, filtered=args.filtered)
    print(f"{args.split}: {format_report(report)}")
    if args.report:
        write_report(args.report, report)
    return 0


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    ds = _load(args)
    n_e = ds.vocab.n_entities
    for name, value in (("--s", args.s), ("--o", args.o)):
        if not 0 <= value < n_e:
            raise ValueError(f"{name} {value} is not an entity id in [0, {n_e})")
    probs = forward_predict(ckpt.to_model(), ds, args.t, [(args.s, args.o)]).data[0]
    top = np.argsort(-probs, kind="stable")[: args.topk]
    print(f"{ds.vocab.entity_name(args.s)} -> {ds.vocab.entity_name(args.o)} at t={args.t}")
    for rank, r in enumerate(top, 1):
        print(f"{rank:>3}  {probs[r]:.4f}  {ds.vocab.type_name(int(r))}")
    return 0


def cmd_stats(args) -> int:
    stats = dataset_stats(_load(args))
    for key, value in stats.items():
        print(f"{key:<12}{value}")
    return 0


def cmd_synth(args) -> int:
    ds = synth_periodic_tkg(args.entities, args.types, args.period, args.steps, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds.all_quadruples())} events over {ds.t_max} timesteps to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grouptkg",
                                     description="Group-aware event-type forecasting on TKGs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--data-dir", required=True)
        p.add_argument("--granularity", type=int, default=None,
                       help="timestamp quantum (default: gcd of all timestamps)")

    p = sub.add_parser("train", help="fit a model and write the best checkpoint")
    data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--groups", type=int, default=16)
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lr-mapper", type=float, default=0.05)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-group-pathway", action="store_true")
    p.add_argument("--filtered", action="store_true", help="rank with other true labels removed")
    p.add_argument("--composition", choices=("sub", "mult"), default="sub")
    p.add_argument("--corr-reduce", choices=("mean", "sum"), default="mean")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="MRR and Hits@k of a checkpoint on one split")
    data_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--filtered", action="store_true")
    p.add_argument("--report", help="also write key=value metrics to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="top-k event types for one entity pair")
    data_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--o", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--topk", type=int, default=5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stats", help="dataset counts")
    data_args(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write the periodic synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--entities", type=int, default=20)
    p.add_argument("--types", type=int, default=8)
    p.add_argument("--period", type=int, default=4)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, RuntimeError) as exc:
        print(f"grouptkg {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
