"""Plot pipeline outputs. Reads only the CSV files written by the pipelines; needs matplotlib.

    python scripts/plot_results.py results/mask --kind mask
    python scripts/plot_results.py results/ratings --kind rating
"""
import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_mask(root: Path):
    rank = rows(root / "relerr_by_rank.csv")
    fig, ax = plt.subplots(1, 3, figsize=(13, 3.5))
    ax[0].semilogy([int(r["rank"]) for r in rank], [float(r["relative_error"]) for r in rank], "o-")
    ax[0].set(xlabel="rank", ylabel="relative error")

    by_phi = defaultdict(list)
    for r in rows(root / "phi_sweep.csv"):
        by_phi[float(r["phi"])].append((float(r["relative_error"]), float(r["core_consistency"])))
    phis = sorted(by_phi)
    ax[1].semilogy(phis, [np.median([e for e, _ in by_phi[p]]) for p in phis], "o-")
    ax[1].set(xlabel="phi", ylabel="median relative error")
    ax[2].plot(phis, [np.median([c for _, c in by_phi[p]]) for p in phis], "o-")
    ax[2].set(xlabel="phi", ylabel="median core consistency (%)", ylim=(-10, 105))
    fig.tight_layout()
    fig.savefig(root / "mask_summary.png", dpi=120)

    # emission-pattern analogues: mode-2 factor columns of the full and masked fits
    dirs = [root / "factors_full"] + sorted(root.glob("factors_phi*"))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for d in dirs:
        F = np.loadtxt(d / "factor_mode2.csv", delimiter=",", ndmin=2)
        for j in range(F.shape[1]):
            sign = np.sign(F[np.argmax(np.abs(F[:, j])), j])
            ax.plot(sign * F[:, j], label=f"{d.name} col {j + 1}", lw=1)
    ax.set(xlabel="index", ylabel="factor value")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(root / "factor_columns.png", dpi=120)


def plot_rating(root: Path):
    by_rule = defaultdict(list)
    for r in rows(root / "rmse_by_rank.csv"):
        by_rule[r["rule"]].append((int(r["rank"]), float(r["test_rmse"])))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for rule, pts in by_rule.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=rule)
    ax.set(xlabel="rank", ylabel="test RMSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(root / "rmse_by_rank.png", dpi=120)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("results")
    parser.add_argument("--kind", choices=["mask", "rating"], required=True)
    args = parser.parse_args()
    (plot_mask if args.kind == "mask" else plot_rating)(Path(args.results))


if __name__ == "__main__":
    main()
