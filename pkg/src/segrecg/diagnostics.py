"""Evaluation metrics: RMSE, relative error, rating rules, core consistency."""
from __future__ import annotations

import warnings
from enum import Enum

import numpy as np

from .tensor_core import CPDModel, ShapeError, as_dense, cpd_reconstruct, frobenius_norm


class RankDeficientWarning(UserWarning):
    """A factor matrix is numerically rank deficient; core consistency used a regularized pseudo-inverse."""


class PredictionRule(str, Enum):
    WEIGHTED_AVERAGE = "weighted_average"
    RESCALE_THEN_AVERAGE = "rescale_then_average"
    CLAMP_THEN_AVERAGE = "clamp_then_average"
    ARGMAX = "argmax"

    @classmethod
    def from_option(cls, option) -> "PredictionRule":
        """Accept the option numbers 1-4 as well as rule names."""
        if isinstance(option, cls):
            return option
        numbered = {"1": cls.WEIGHTED_AVERAGE, "2": cls.RESCALE_THEN_AVERAGE,
                    "3": cls.CLAMP_THEN_AVERAGE, "4": cls.ARGMAX}
        return numbered.get(str(option)) or cls(option)

    @property
    def option(self) -> int:
        return list(PredictionRule).index(self) + 1


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=float).reshape(-1)
    actual = np.asarray(actual, dtype=float).reshape(-1)
    if pred.shape != actual.shape:
        raise ValueError("rmse: length mismatch")
    if pred.size == 0:
        raise ValueError("rmse: empty input")
    return float(np.sqrt(np.mean((actual - pred) ** 2)))


def relative_error(reference, model: CPDModel) -> float:
    """``||T - A||_F / ||T||_F``."""
    reference = as_dense(reference)
    if reference.shape != model.shape:
        raise ShapeError("reference and model shapes differ")
    ref_norm = frobenius_norm(reference)
    if ref_norm == 0:
        raise ValueError("relative error of a zero reference")
    return frobenius_norm(reference - cpd_reconstruct(model)) / ref_norm


def predict_rating(scores, rule) -> float:
    """Turn the model's five scores for one (user, item) pair into a rating."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    stars = np.arange(1, s.size + 1)
    rule = PredictionRule.from_option(rule)
    if rule is PredictionRule.WEIGHTED_AVERAGE:
        return float(stars @ s)
    if rule is PredictionRule.RESCALE_THEN_AVERAGE:
        total = s.sum()
        if abs(total) <= 1e-12:
            raise ValueError("scores sum to zero; cannot rescale")
        return float(stars @ (s / total))
    if rule is PredictionRule.CLAMP_THEN_AVERAGE:
        return float(stars @ np.clip(s, 0.0, 1.0))
    return float(np.argmax(s) + 1)


def predict_ratings(scores, rule) -> np.ndarray:
    """Row-wise :func:`predict_rating` for an ``(m, 5)`` score array.

    Degenerate rows under the rescaling rule are returned as ``nan``.
    """
    s = np.asarray(scores, dtype=float)
    stars = np.arange(1, s.shape[1] + 1)
    rule = PredictionRule.from_option(rule)
    if rule is PredictionRule.WEIGHTED_AVERAGE:
        return s @ stars
    if rule is PredictionRule.RESCALE_THEN_AVERAGE:
        total = s.sum(axis=1)
        bad = np.abs(total) <= 1e-12
        out = (s @ stars) / np.where(bad, 1.0, total)
        out[bad] = np.nan
        return out
    if rule is PredictionRule.CLAMP_THEN_AVERAGE:
        return np.clip(s, 0.0, 1.0) @ stars
    return (np.argmax(s, axis=1) + 1).astype(float)


def secant_dim_bound(r: int, dims, general: bool = False) -> int:
    """Upper bound ``r (n1 + n2 + n3 - 2)`` on the dimension of the r-th secant variety.

    ``general=True`` allows any order via ``r (sum n_i - d + 1)``.
    """
    dims = [int(n) for n in dims]
    if r < 1:
        raise ValueError("rank must be at least 1")
    if len(dims) != 3 and not general:
        raise ValueError("bound is stated for order-3 tensors; pass general=True otherwise")
    return r * (sum(dims) - len(dims) + 1)


def least_squares_core(reference, model: CPDModel, rcond: float = 1e-12):
    """Tucker core fitting ``reference`` best for fixed CP factors.

    Weights are folded into the first factor. Returns the core and whether
    any factor was rank deficient.
    """
    reference = as_dense(reference)
    if reference.shape != model.shape:
        raise ShapeError("reference and model shapes differ")
    mats = list(model.factors)
    mats[0] = mats[0] * model.weights
    deficient = False
    core = reference
    for k, m in enumerate(mats):
        if np.linalg.matrix_rank(m, tol=rcond * max(m.shape) * np.linalg.norm(m, 2)) < m.shape[1]:
            deficient = True
        pinv = np.linalg.pinv(m, rcond=rcond)
        core = np.moveaxis(np.tensordot(pinv, core, axes=([1], [k])), 0, k)
    return core, deficient


def corcondia(reference, model: CPDModel) -> float:
    """Core consistency ``100 (1 - ||G - I||^2 / r)`` of a CP model.

    ``G`` is the least-squares Tucker core and ``I`` the superdiagonal
    identity core. Emits :class:`RankDeficientWarning` when a factor is
    rank deficient.
    """
    core, deficient = least_squares_core(reference, model)
    if deficient:
        warnings.warn("rank-deficient factor matrix in core consistency", RankDeficientWarning,
                      stacklevel=2)
    r = model.rank
    ident = np.zeros(core.shape)
    ident[(np.arange(r),) * core.ndim] = 1.0
    return float(100.0 * (1.0 - np.sum((core - ident) ** 2) / r))
