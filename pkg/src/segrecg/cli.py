"""Command line entry point: ``segrecg {fit,rating-pipeline,mask-pipeline,diagnose,synth}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .diagnostics import PredictionRule, RankDeficientWarning, corcondia, relative_error
from .model_io import load_model, save_model
from .pipelines import ExperimentConfig, fit_cpd, load_reference, run_mask_pipeline, run_rating_pipeline
from .rcg import BetaRule, OptimizerConfig
from .tensor_io import read_tensor, write_tensor


def parse_ranks(text: str):
    """``"a..b"`` (inclusive) or a comma-separated list."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty rank range {text!r}")
        return list(range(lo, hi + 1))
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rank list {text!r}") from None


def parse_floats(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def parse_rules(text: str):
    if text == "all":
        return list(PredictionRule)
    return [PredictionRule.from_option(t) for t in text.split(",")]


def _optimizer_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grad-tol", type=float, default=1e-6,
                   help="stop when the Riemannian gradient norm drops below this")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--beta", choices=[b.value for b in BetaRule],
                   default=BetaRule.HESTENES_STIEFEL.value)
    p.add_argument("--out", default="results", help="output directory")


def _optimizer(args) -> OptimizerConfig:
    return OptimizerConfig(grad_tol=args.grad_tol, max_iters=args.max_iters, beta_rule=args.beta)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segrecg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a CP model to a COO or dense tensor file")
    p.add_argument("input")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--format", choices=["auto", "coo", "dense"], default="auto")
    p.add_argument("--penalty", choices=["on", "off"], default="off")
    p.add_argument("--penalty-power", type=int, default=9)
    _optimizer_args(p)

    p = sub.add_parser("rating-pipeline", help="rank sweep with RMSE on held-out ratings")
    p.add_argument("input", help="ratings file (user::item::rating[::ts] or CSV)")
    p.add_argument("--ranks", type=parse_ranks, default=[1, 2, 3, 4, 5])
    p.add_argument("--rule", type=parse_rules, default=list(PredictionRule))
    p.add_argument("--penalty", choices=["on", "off"], default="on")
    p.add_argument("--penalty-sample", type=int, default=None,
                   help="penalize a fixed random subsample of entries instead of all")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--topk-users", type=int, default=100)
    p.add_argument("--topk", type=int, default=10)
    _optimizer_args(p)

    p = sub.add_parser("mask-pipeline", help="rank sweep and phi sweep on a complete tensor")
    p.add_argument("input")
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--ranks", type=parse_ranks, default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--phi", type=parse_floats, default=[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
    p.add_argument("--repeats", type=int, default=1)
    _optimizer_args(p)

    p = sub.add_parser("diagnose", help="relative error and core consistency of stored factors")
    p.add_argument("manifest", help="manifest.json or its directory")
    p.add_argument("--reference", required=True, help="complete reference tensor file")
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("synth", help="write a planted test problem")
    p.add_argument("kind", choices=["tensor", "ratings"])
    p.add_argument("output")
    p.add_argument("--shape", type=int, nargs="+", default=[5, 50, 30])
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--users", type=int, default=30)
    p.add_argument("--items", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def cmd_fit(args) -> int:
    data = read_tensor(args.input, args.format)
    penalty = 1.0 if args.penalty == "on" else 0.0
    opt = _optimizer(args)
    report = fit_cpd(data, args.rank, seed=args.seed, optimizer=opt, penalty_weight=penalty,
                     penalty_power=args.penalty_power)
    config = {"command": "fit", "input": str(args.input), "rank": args.rank,
              "penalty": args.penalty, "penalty_power": args.penalty_power,
              "grad_tol": args.grad_tol, "max_iters": args.max_iters, "beta": args.beta}
    out = Path(args.out)
    save_model(out, report.model, seed=args.seed, config=config,
               extra={"report": "report.json"})
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n",
                                     encoding="utf-8")
    print(json.dumps({"iterations": report.iterations, "termination": report.termination,
                      "objective": report.final_objective, "grad_norm": report.grad_norm[-1]}))
    return 0


def _experiment(args, **kw) -> ExperimentConfig:
    return ExperimentConfig(input_path=args.input, seed=args.seed, optimizer=_optimizer(args),
                            out_dir=args.out, **kw)


def cmd_rating(args) -> int:
    config = _experiment(args, ranks=args.ranks, rules=args.rule,
                         penalty_weight=1.0 if args.penalty == "on" else 0.0,
                         penalty_sample=args.penalty_sample, split_fraction=args.split,
                         topk_users=args.topk_users, topk=args.topk)
    summary = run_rating_pipeline(config)
    print(json.dumps({r: s["test_rmse"] for r, s in summary["ranks"].items()}, indent=1))
    return 0


def cmd_mask(args) -> int:
    config = _experiment(args, ranks=args.ranks, rank=args.rank, phis=args.phi,
                         repeats=args.repeats, penalty_weight=0.0)
    summary = run_mask_pipeline(config)
    print(json.dumps({"ranks": summary["ranks"], "phi": summary["phi"]}, indent=1))
    return 0


def cmd_diagnose(args) -> int:
    model, _ = load_model(args.manifest)
    reference = load_reference(args.reference)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankDeficientWarning)
        cc = corcondia(reference, model)
    result = {"relative_error": relative_error(reference, model), "core_consistency": cc,
              "rank_deficient": bool(caught)}
    text = json.dumps(result, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_synth(args) -> int:
    from .synthetic import planted_ratings, planted_tensor

    if args.kind == "tensor":
        T, _ = planted_tensor(args.shape, args.rank, seed=args.seed, noise=args.noise)
        write_tensor(args.output, T)
    else:
        planted = planted_ratings(args.users, args.items, noise=args.noise, seed=args.seed)
        t = planted.table
        lines = [f"{t.user_ids[u] + 1}::{t.item_ids[i] + 1}::{r}::0"
                 for u, i, r in zip(t.users, t.items, t.ratings)]
        Path(args.output).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


COMMANDS = {"fit": cmd_fit, "rating-pipeline": cmd_rating, "mask-pipeline": cmd_mask,
            "diagnose": cmd_diagnose, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"segrecg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
