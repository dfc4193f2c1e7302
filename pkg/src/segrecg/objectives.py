"""Least-squares objectives over the product of Segre manifolds.

The objective is

    f(A) = 1/2 sum_{I} (T - A)^2 + pen_weight * sum_{all entries} (A^2 - A)^power

where ``A`` is the CP model and ``I`` the observed index set (every entry
for a dense target). The penalty nudges entries of a one-hot rating tensor
towards ``[0, 1]``; with an odd power it is negative but tiny inside that
interval.

Sign convention: :func:`riemannian_gradient` returns the true gradient,
the projection of the ambient gradient ``A - T`` (plus the penalty term),
so the steepest-descent direction is its negative.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Optional, Union

import numpy as np

from .segre import CPDTangent, orthogonalize, tangent_from_contractions
from .tensor_core import (
    CPDModel,
    ShapeError,
    SparseObservations,
    cpd_entries,
    cpd_reconstruct,
    dense_mttkrp,
    sparse_mttkrp,
)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Target data and penalty settings.

    ``penalty_indices`` switches the penalty to a fixed subsample of entries
    (an ``(m, d)`` array of 0-based indices), rescaled by ``N / m`` so it
    estimates the full sum. Off by default; meant for tensors too large to
    penalize densely.
    """

    observations: Union[SparseObservations, np.ndarray]
    penalty_weight: float = 0.0
    penalty_power: int = 9
    penalty_indices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be nonnegative")
        if int(self.penalty_power) != self.penalty_power or self.penalty_power < 1 \
                or self.penalty_power % 2 == 0:
            raise ValueError("penalty_power must be a positive odd integer")
        if not isinstance(self.observations, SparseObservations):
            obs = np.asarray(self.observations, dtype=float)
            if obs.ndim < 2:
                raise ShapeError("dense target must have order >= 2")
            object.__setattr__(self, "observations", obs)
        if self.penalty_indices is not None:
            idx = np.asarray(self.penalty_indices, dtype=np.int64)
            if idx.ndim != 2 or idx.shape[1] != len(self.shape) or idx.shape[0] == 0:
                raise ShapeError("penalty_indices must be a nonempty (m, d) array")
            object.__setattr__(self, "penalty_indices", idx)

    @property
    def shape(self) -> tuple:
        return tuple(self.observations.shape)

    @property
    def is_dense(self) -> bool:
        return not isinstance(self.observations, SparseObservations)

    @property
    def penalized(self) -> bool:
        return self.penalty_weight > 0


def _check(model: CPDModel, spec: ObjectiveSpec):
    if model.shape != spec.shape:
        raise ShapeError(f"model shape {model.shape} != data shape {spec.shape}")


def penalty_value(a, power: int = 9):
    a = np.asarray(a, dtype=float)
    return (a * a - a) ** power


def penalty_derivative(a, power: int = 9):
    a = np.asarray(a, dtype=float)
    return power * (a * a - a) ** (power - 1) * (2.0 * a - 1.0)


def _penalty_scale(spec: ObjectiveSpec) -> float:
    return prod(spec.shape) / spec.penalty_indices.shape[0]


def objective(model: CPDModel, spec: ObjectiveSpec) -> float:
    _check(model, spec)
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.is_dense:
            full = cpd_reconstruct(model)
            value = 0.5 * float(np.sum((spec.observations - full) ** 2))
        else:
            obs = spec.observations
            resid = obs.values - cpd_entries(model, obs.indices)
            value = 0.5 * float(resid @ resid)
            full = None
        if spec.penalized:
            if spec.penalty_indices is not None:
                a = cpd_entries(model, spec.penalty_indices)
                pen = _penalty_scale(spec) * float(np.sum(penalty_value(a, spec.penalty_power)))
            else:
                if full is None:
                    full = cpd_reconstruct(model)
                pen = float(np.sum(penalty_value(full, spec.penalty_power)))
            value += spec.penalty_weight * pen
    return value


def riemannian_gradient(model: CPDModel, spec: ObjectiveSpec) -> CPDTangent:
    """Projection of the ambient gradient onto the tangent space at ``model``."""
    _check(model, spec)
    d = model.ndim
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.is_dense or (spec.penalized and spec.penalty_indices is None):
            full = cpd_reconstruct(model)
            if spec.is_dense:
                G = full - spec.observations
            else:
                G = np.zeros(model.shape)
                obs = spec.observations
                if len(obs):
                    G[tuple(obs.indices.T)] = full[tuple(obs.indices.T)] - obs.values
            if spec.penalized:
                G = G + spec.penalty_weight * penalty_derivative(full, spec.penalty_power)
            contractions = [dense_mttkrp(G, model.factors, k) for k in range(d)]
        else:
            obs = spec.observations
            indices = obs.indices
            values = cpd_entries(model, indices) - obs.values
            if spec.penalized:
                a = cpd_entries(model, spec.penalty_indices)
                pen = spec.penalty_weight * _penalty_scale(spec) \
                    * penalty_derivative(a, spec.penalty_power)
                indices = np.concatenate([indices, spec.penalty_indices])
                values = np.concatenate([values, pen])
            contractions = [sparse_mttkrp(indices, values, model.factors, k, model.shape[k])
                            for k in range(d)]
    return orthogonalize(model, tangent_from_contractions(model, contractions))
