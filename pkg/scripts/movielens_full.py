"""Full-scale MovieLens 1M rating experiment (long running, not part of the test suite).

Fits ranks 1..10 on an 80/20 split of ``ratings.dat`` with the penalized
objective and stops at an absolute gradient norm of 0.1. A single rank-7
fit alone takes minutes to hours depending on the machine.

    python scripts/movielens_full.py ml-1m/ratings.dat --out results/movielens
"""
import argparse
import logging

from segrecg.pipelines import ExperimentConfig, run_rating_pipeline
from segrecg.rcg import OptimizerConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("ratings")
    parser.add_argument("--ranks", default="1,2,3,4,5,6,7,8,9,10")
    parser.add_argument("--grad-tol", type=float, default=0.1)
    parser.add_argument("--max-iters", type=int, default=2000)
    parser.add_argument("--penalty-sample", type=int, default=None,
                        help="penalize a random subsample of this many entries instead of all 118M")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/movielens")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    config = ExperimentConfig(
        input_path=args.ratings,
        ranks=[int(r) for r in args.ranks.split(",")],
        penalty_weight=1.0,
        penalty_sample=args.penalty_sample,
        optimizer=OptimizerConfig(grad_tol=args.grad_tol, max_iters=args.max_iters),
        seed=args.seed,
        out_dir=args.out,
    )
    summary = run_rating_pipeline(config)
    for rank, info in summary["ranks"].items():
        print(rank, info["test_rmse"])


if __name__ == "__main__":
    main()
