import warnings

import numpy as np
import pytest

from segrecg.diagnostics import (
    PredictionRule,
    RankDeficientWarning,
    corcondia,
    least_squares_core,
    predict_rating,
    predict_ratings,
    relative_error,
    rmse,
    secant_dim_bound,
)
from segrecg.objectives import ObjectiveSpec
from segrecg.rcg import OptimizerConfig, minimize
from segrecg.segre import random_point
from segrecg.synthetic import planted_tensor
from segrecg.tensor_core import CPDModel, Rank1Term, cpd_reconstruct

e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def test_rmse_examples():
    assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert abs(rmse([0.0, 0.0], [3.0, 4.0]) - np.sqrt(12.5)) <= 1e-15
    assert rmse([1.0], [2.0]) == 1.0


def test_rmse_errors():
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        rmse([], [])


def test_rmse_permutation_and_scaling(rng):
    for _ in range(20):
        x, y = rng.standard_normal(15), rng.standard_normal(15)
        perm = rng.permutation(15)
        base = rmse(x, y)
        assert abs(rmse(x[perm], y[perm]) - base) <= 1e-12
        c = rng.uniform(-5, 5)
        assert abs(rmse(c * x, c * y) - abs(c) * base) <= 1e-12 * (1 + base)


def test_relative_error_examples():
    model = random_point((3, 4, 5), 2, seed=0)
    T = cpd_reconstruct(model)
    assert relative_error(T, model) <= 1e-15
    assert abs(relative_error(T, random_point((3, 4, 5), 2, scale=1e-14, seed=1)) - 1.0) <= 1e-12
    with pytest.raises(ValueError):
        relative_error(np.zeros((3, 4, 5)), model)


def test_relative_error_matches_formula(rng):
    model = random_point((3, 4, 5), 2, seed=2)
    T = rng.standard_normal((3, 4, 5))
    A = np.einsum("r,ir,jr,kr->ijk", model.weights, *model.factors)
    want = np.sqrt(((T - A) ** 2).sum() / (T ** 2).sum())
    assert abs(relative_error(T, model) - want) <= 1e-12


# -- prediction rules -----------------------------------------------------------------

@pytest.mark.parametrize("rule", list(PredictionRule))
def test_one_hot_scores_give_the_star(rule):
    assert predict_rating([0, 0, 1, 0, 0], rule) == 3.0


def test_clamp_rule_example():
    assert predict_rating([-0.1, 0, 1.2, 0, 0], PredictionRule.CLAMP_THEN_AVERAGE) == 3.0


def test_argmax_tie_goes_to_smaller_star():
    assert predict_rating([0.5, 0.5, 0, 0, 0], PredictionRule.ARGMAX) == 1.0


def test_rescale_rule_degenerate():
    with pytest.raises(ValueError):
        predict_rating([1.0, -1.0, 0, 0, 0], PredictionRule.RESCALE_THEN_AVERAGE)
    out = predict_ratings(np.array([[1.0, -1.0, 0, 0, 0], [0, 2.0, 0, 0, 0]]), 2)
    assert np.isnan(out[0]) and out[1] == 2.0


def test_rules_one_and_two_agree_on_normalized_scores(rng):
    for _ in range(50):
        s = rng.uniform(0, 1, 5)
        s /= s.sum()
        assert abs(predict_rating(s, 1) - predict_rating(s, 2)) <= 1e-12


def test_vectorized_rules_match_scalar(rng):
    S = rng.normal(0.2, 0.4, (40, 5))
    for rule in PredictionRule:
        want = [predict_rating(s, rule) for s in S]
        assert np.allclose(predict_ratings(S, rule), want, atol=1e-12)


def test_rule_options_round_trip():
    for k, rule in enumerate(PredictionRule, start=1):
        assert rule.option == k
        assert PredictionRule.from_option(k) is rule
        assert PredictionRule.from_option(str(k)) is rule
        assert PredictionRule.from_option(rule.value) is rule
    with pytest.raises(ValueError):
        PredictionRule.from_option(5)


# -- secant bound ---------------------------------------------------------------------

def test_secant_bound_examples():
    assert secant_dim_bound(3, (5, 201, 61)) == 795
    assert secant_dim_bound(1, (2, 2, 2)) == 4
    with pytest.raises(ValueError):
        secant_dim_bound(0, (2, 2, 2))
    with pytest.raises(ValueError):
        secant_dim_bound(1, (2, 2, 2, 2))
    assert secant_dim_bound(1, (2, 2, 2, 2), general=True) == 5


def test_secant_bound_monotone(rng):
    for _ in range(30):
        r, dims = int(rng.integers(1, 6)), [int(n) for n in rng.integers(1, 50, 3)]
        base = secant_dim_bound(r, dims)
        assert secant_dim_bound(r + 1, dims) > base
        for k in range(3):
            bigger = list(dims)
            bigger[k] += 1
            assert secant_dim_bound(r, bigger) > base


# -- core consistency -----------------------------------------------------------------

def test_corcondia_hand_rank1():
    # the core is the single scalar T[0,0,0] / lam, all other entries are projected out
    model = CPDModel.from_terms([Rank1Term(2.0, [e1, e1, e1])])
    T = np.zeros((2, 2, 2))
    T[0, 0, 0] = 2.0
    T[1, 1, 0] = 5.0
    assert corcondia(T, model) == 100.0
    T[0, 0, 0] = 3.0  # core 1.5 -> 100 (1 - 0.25)
    assert corcondia(T, model) == 75.0


@pytest.mark.parametrize("r", [1, 2, 3])
def test_corcondia_exact_models(r):
    for seed in range(20):
        model = random_point((5, 6, 7), r, scale=2.0, seed=seed)
        assert abs(corcondia(cpd_reconstruct(model), model) - 100.0) <= 1e-6


def test_corcondia_drops_when_overfactored():
    values = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        for seed in range(5):
            T, _ = planted_tensor((6, 7, 8), 2, seed=seed)
            start = random_point(T.shape, 4, scale=np.linalg.norm(T) / 4, seed=seed + 50)
            fit = minimize(start, ObjectiveSpec(T), OptimizerConfig(max_iters=500))
            values.append(corcondia(T, fit.model))
    assert np.median(values) < 50


def test_fitted_exact_rank_is_consistent():
    T, _ = planted_tensor((6, 7, 8), 2, seed=3)
    start = random_point(T.shape, 2, scale=np.linalg.norm(T) / 2, seed=4)
    fit = minimize(start, ObjectiveSpec(T), OptimizerConfig(grad_tol=1e-10))
    assert abs(corcondia(T, fit.model) - 100.0) <= 1e-4


def test_rank_deficient_factor_warns():
    U = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    model = CPDModel([1.0, 1.0], [U, np.eye(3)[:, :2], np.eye(3)[:, :2]])
    _, deficient = least_squares_core(np.ones((3, 3, 3)), model)
    assert deficient
    with pytest.warns(RankDeficientWarning):
        corcondia(np.ones((3, 3, 3)), model)
