"""Experiment drivers: rating completion and mask-subsampled tensor completion.

Both pipelines write CSV summaries that depend only on the configuration
and seeds (wall-clock timings go into ``summary.json`` instead), so the
same configuration reproduces identical CSV bytes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from math import prod
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .diagnostics import (
    PredictionRule,
    RankDeficientWarning,
    corcondia,
    relative_error,
    secant_dim_bound,
)
from .model_io import save_model
from .objectives import ObjectiveSpec
from .ratings import (
    RatingsTable,
    evaluate_rules,
    one_hot_tensorize,
    parse_ratings,
    split_train_test,
    top_k,
)
from .rcg import FitReport, OptimizerConfig, minimize
from .segre import random_point
from .tensor_core import SparseObservations, as_dense
from .tensor_io import read_tensor

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    input_path: Optional[str] = None
    ranks: Sequence[int] = (1, 2, 3, 4, 5)
    rank: int = 3
    penalty_weight: float = 1.0
    penalty_power: int = 9
    penalty_sample: Optional[int] = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    split_fraction: float = 0.8
    seed: int = 0
    phis: Sequence[float] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    repeats: int = 1
    rules: Sequence[Union[str, int]] = tuple(PredictionRule)
    init_scale: Union[str, float] = "auto"
    topk_users: int = 100
    topk: int = 10
    out_dir: str = "results"

    def __post_init__(self):
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")
        if any(not phi > 0 for phi in self.phis):
            raise ValueError("phi values must be positive")
        if any(int(r) < 1 for r in self.ranks) or self.rank < 1:
            raise ValueError("ranks must be positive")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")
        self.ranks = tuple(int(r) for r in self.ranks)
        self.phis = tuple(float(p) for p in self.phis)
        self.rules = tuple(PredictionRule.from_option(r) for r in self.rules)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["optimizer"] = {k: (v.value if hasattr(v, "value") else v)
                            for k, v in asdict(self.optimizer).items()}
        out["rules"] = [r.value for r in self.rules]
        return out


def derived_seed(seed: int, *keys) -> int:
    """Independent deterministic sub-seed for ``(seed, *keys)``."""
    words = [int(seed)] + [int(round(k * 1000)) if isinstance(k, float) else int(k) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def sample_mask(T, count: int, seed=None) -> SparseObservations:
    """Keep ``count`` distinct entries of ``T`` chosen uniformly without replacement."""
    T = as_dense(T)
    count = int(count)
    if not 0 <= count <= T.size:
        raise ValueError(f"cannot sample {count} of {T.size} entries")
    rng = np.random.default_rng(seed)
    lin = np.sort(rng.choice(T.size, size=count, replace=False))
    idx = np.array(np.unravel_index(lin, T.shape), dtype=np.int64).T
    return SparseObservations(T.shape, idx, T.reshape(-1)[lin])


def _auto_scale(data, rank: int) -> float:
    if isinstance(data, SparseObservations):
        if len(data) == 0:
            return 1.0
        norm = np.linalg.norm(data.values) * np.sqrt(prod(data.shape) / len(data))
    else:
        norm = np.linalg.norm(data)
    return float(norm / np.sqrt(rank)) if norm > 0 else 1.0


def fit_cpd(data, rank: int, *, seed=None, optimizer: OptimizerConfig = OptimizerConfig(),
            penalty_weight: float = 0.0, penalty_power: int = 9,
            penalty_sample: Optional[int] = None, init_scale="auto") -> FitReport:
    """Fit a rank-``rank`` CP model to a dense tensor or to observed entries."""
    penalty_indices = None
    if penalty_sample:
        shape = data.shape
        rng = np.random.default_rng(derived_seed(seed or 0, 7))
        lin = np.sort(rng.choice(prod(shape), size=min(int(penalty_sample), prod(shape)),
                                 replace=False))
        penalty_indices = np.array(np.unravel_index(lin, shape)).T
    spec = ObjectiveSpec(data, penalty_weight, penalty_power, penalty_indices)
    scale = _auto_scale(data, rank) if init_scale == "auto" else float(init_scale)
    start = random_point(spec.shape, rank, scale=scale, seed=seed)
    return minimize(start, spec, optimizer)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def _corcondia_checked(reference, model):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankDeficientWarning)
        value = corcondia(reference, model)
    return value, any(issubclass(w.category, RankDeficientWarning) for w in caught)


# -- ratings ------------------------------------------------------------------

def run_rating_pipeline(config: ExperimentConfig, table: Optional[RatingsTable] = None) -> dict:
    """Rank sweep on a random train/test split of a rating table.

    For each rank the training ratings are split again; the model is fit
    (penalized objective) on the inner training part and scored by RMSE on
    the inner validation part and on the held-out test part, for each
    prediction rule. Writes ``rmse_by_rank.csv``, ``fit_rank{r}.json``,
    per-rank factor directories and ``summary.json``.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if table is None:
        table = parse_ratings(config.input_path)
    train, test = split_train_test(table, config.split_fraction, config.seed)
    if len(test) == 0:
        raise ValueError("test split is empty")
    header = ["rank", "rule", "option", "validation_rmse", "test_rmse", "validation_fallbacks",
              "test_fallbacks", "iterations", "termination", "final_objective"]
    rows, summary = [], {"config": config.to_dict(), "ranks": {}}
    models = {}
    for r in config.ranks:
        fit_part, valid = split_train_test(train, config.split_fraction,
                                           derived_seed(config.seed, r, 1))
        if len(valid) == 0:
            raise ValueError("validation split is empty")
        report = fit_cpd(one_hot_tensorize(fit_part), r, seed=derived_seed(config.seed, r, 2),
                         optimizer=config.optimizer, penalty_weight=config.penalty_weight,
                         penalty_power=config.penalty_power,
                         penalty_sample=config.penalty_sample, init_scale=config.init_scale)
        models[r] = report.model
        v_scores = evaluate_rules(report.model, valid, config.rules)
        t_scores = evaluate_rules(report.model, test, config.rules)
        for rule in config.rules:
            rows.append([r, rule.value, rule.option, v_scores[rule]["rmse"],
                         t_scores[rule]["rmse"], v_scores[rule]["fallbacks"],
                         t_scores[rule]["fallbacks"], report.iterations, report.termination,
                         float(report.final_objective)])
        _write(out / f"fit_rank{r}.json", json.dumps(report.to_dict(), indent=1) + "\n")
        save_model(out / f"factors_rank{r}", report.model, seed=config.seed,
                   config=config.to_dict())
        summary["ranks"][r] = {
            "iterations": report.iterations,
            "termination": report.termination,
            "fit_seconds": report.wall_time[-1],
            "validation_rmse": {k.value: v["rmse"] for k, v in v_scores.items()},
            "test_rmse": {k.value: v["rmse"] for k, v in t_scores.items()},
        }
        log.info("rank %d: %s", r, summary["ranks"][r]["test_rmse"])
    _write(out / "rmse_by_rank.csv", _csv_text(header, rows))

    # timing probe: top-k items for randomly chosen users
    best = min(config.ranks, key=lambda r: summary["ranks"][r]["validation_rmse"].get(
        PredictionRule.WEIGHTED_AVERAGE.value, np.inf))
    rng = np.random.default_rng(derived_seed(config.seed, 3))
    users = rng.choice(table.n_users, size=min(config.topk_users, table.n_users), replace=False)
    t0 = time.perf_counter()
    top_k(models[best], users, config.topk, exclude=table)
    summary["topk_probe"] = {"rank": best, "users": int(users.size), "k": config.topk,
                             "seconds": time.perf_counter() - t0}
    summary["clipping"] = "rules 1-3 clipped to [1, 5] before RMSE"
    _write(out / "summary.json", json.dumps(summary, indent=1, default=str) + "\n")
    return summary


# -- masked completion ---------------------------------------------------------

def load_reference(path) -> np.ndarray:
    data = read_tensor(path)
    if isinstance(data, SparseObservations):
        if len(data) != prod(data.shape):
            raise ValueError("reference tensor must be complete")
        return data.to_dense()
    return data


def run_mask_pipeline(config: ExperimentConfig, reference=None) -> dict:
    """Rank sweep on the full tensor, then a phi sweep of masked fits at ``config.rank``.

    The mask for a given phi keeps ``round(phi * r (n1 + n2 + n3 - 2))``
    entries (capped at the tensor size). Errors and core consistency are
    measured against the full reference. Writes ``relerr_by_rank.csv``,
    ``phi_sweep.csv``, factor directories and ``summary.json``.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    T = as_dense(reference if reference is not None else load_reference(config.input_path))
    general = T.ndim != 3
    summary = {"config": config.to_dict(), "shape": list(T.shape), "ranks": {}, "phi": []}

    rank_rows = []
    for r in config.ranks:
        report = fit_cpd(T, r, seed=derived_seed(config.seed, r, 0), optimizer=config.optimizer,
                         penalty_weight=0.0, init_scale=config.init_scale)
        cc, deficient = _corcondia_checked(T, report.model)
        err = relative_error(T, report.model)
        rank_rows.append([r, err, cc, int(deficient), report.iterations, report.termination])
        summary["ranks"][r] = {"relative_error": err, "core_consistency": cc,
                               "fit_seconds": report.wall_time[-1]}
        if r == config.rank:
            save_model(out / "factors_full", report.model, seed=config.seed,
                       config=config.to_dict())
    _write(out / "relerr_by_rank.csv",
           _csv_text(["rank", "relative_error", "core_consistency", "rank_deficient",
                      "iterations", "termination"], rank_rows))

    bound = secant_dim_bound(config.rank, T.shape, general=general)
    phi_rows = []
    for phi in config.phis:
        count = min(int(round(phi * bound)), T.size)
        for rep in range(config.repeats):
            mask = sample_mask(T, count, derived_seed(config.seed, phi, rep, 1))
            report = fit_cpd(mask, config.rank, seed=derived_seed(config.seed, phi, rep, 2),
                             optimizer=config.optimizer, penalty_weight=0.0,
                             init_scale=config.init_scale)
            cc, deficient = _corcondia_checked(T, report.model)
            err = relative_error(T, report.model)
            phi_rows.append([phi, rep, count, count / T.size, err, cc, int(deficient),
                             report.iterations, report.termination])
            summary["phi"].append({"phi": phi, "repeat": rep, "count": count,
                                   "relative_error": err, "core_consistency": cc,
                                   "fit_seconds": report.wall_time[-1]})
            if rep == 0:
                save_model(out / f"factors_phi{phi:g}", report.model, seed=config.seed,
                           config=config.to_dict(), extra={"phi": phi, "count": count})
    _write(out / "phi_sweep.csv",
           _csv_text(["phi", "repeat", "count", "fraction", "relative_error", "core_consistency",
                      "rank_deficient", "iterations", "termination"], phi_rows))
    summary["secant_dim_bound"] = bound
    _write(out / "summary.json", json.dumps(summary, indent=1, default=str) + "\n")
    return summary
