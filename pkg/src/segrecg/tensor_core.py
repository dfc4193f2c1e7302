"""Tensor containers and multilinear kernels.

Dense tensors are plain ``numpy.ndarray`` objects in C (row-major) order
with ``ndim >= 2``. Observed entries of an incomplete tensor live in
:class:`SparseObservations`, a coordinate list with 0-based indices.
Rank-1 terms and CP models keep their weights separate from unit-norm
factor columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

UNIT_TOL = 1e-12


class ShapeError(ValueError):
    """Raised when tensor shapes or indices do not agree."""


def as_dense(data, shape=None) -> np.ndarray:
    """Validate and return a dense tensor as a float64 C-ordered array."""
    arr = np.ascontiguousarray(data, dtype=float)
    if shape is not None:
        shape = tuple(int(n) for n in shape)
        if arr.size != prod(shape):
            raise ShapeError(f"{arr.size} values do not fill shape {shape}")
        arr = arr.reshape(shape)
    if arr.ndim < 2:
        raise ShapeError("tensors of order < 2 are not supported")
    if any(n < 1 for n in arr.shape):
        raise ShapeError(f"extents must be positive, got {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SparseObservations:
    """Observed entries ``(index, value)`` of a tensor with known shape.

    ``indices`` is an ``(m, d)`` integer array of 0-based positions and
    ``values`` the matching ``(m,)`` float array. Index tuples are unique.
    """

    shape: tuple
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) < 2 or any(n < 1 for n in shape):
            raise ShapeError(f"invalid shape {shape}")
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size == 0:
            idx = idx.reshape(0, len(shape))
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if idx.ndim != 2 or idx.shape[1] != len(shape):
            raise ShapeError(f"indices must have shape (m, {len(shape)})")
        if idx.shape[0] != vals.shape[0]:
            raise ShapeError("indices and values differ in length")
        if idx.size and ((idx < 0).any() or (idx >= np.array(shape)).any()):
            raise ShapeError("index out of range")
        lin = np.ravel_multi_index(idx.T, shape) if idx.size else idx[:, 0]
        if np.unique(lin).size != lin.size:
            raise ShapeError("duplicate index tuples")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", _frozen(idx.copy()))
        object.__setattr__(self, "values", _frozen(vals.copy()))

    def __len__(self):
        return self.values.shape[0]

    @property
    def ndim(self):
        return len(self.shape)

    def with_values(self, values) -> "SparseObservations":
        return SparseObservations(self.shape, self.indices, values)

    def subset(self, rows) -> "SparseObservations":
        rows = np.asarray(rows, dtype=np.int64)
        return SparseObservations(self.shape, self.indices[rows], self.values[rows])

    def to_dense(self, fill=0.0) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=float)
        if len(self):
            out[tuple(self.indices.T)] = self.values
        return out

    @classmethod
    def from_dense(cls, tensor) -> "SparseObservations":
        """All entries of a dense tensor, in row-major order."""
        tensor = as_dense(tensor)
        idx = np.indices(tensor.shape).reshape(tensor.ndim, -1).T
        return cls(tensor.shape, idx, tensor.reshape(-1))


@dataclass(frozen=True)
class Rank1Term:
    """``weight * a_1 (x) ... (x) a_d`` with unit-norm vectors and positive weight."""

    weight: float
    vectors: tuple

    def __post_init__(self):
        vecs = tuple(_frozen(np.array(v, dtype=float).reshape(-1)) for v in self.vectors)
        if not float(self.weight) > 0:
            raise ValueError("weight must be positive")
        for v in vecs:
            if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
                raise ValueError("vectors must have unit norm")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "vectors", vecs)

    @property
    def shape(self):
        return tuple(v.shape[0] for v in self.vectors)


@dataclass(frozen=True)
class CPDModel:
    """Sum of ``rank`` weighted rank-1 terms.

    ``factors[k]`` is an ``n_k x r`` matrix with unit-norm columns; column
    ``j`` across all factors together with ``weights[j]`` forms term ``j``.
    """

    weights: np.ndarray
    factors: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        facs = tuple(np.array(f, dtype=float) for f in self.factors)
        if len(facs) < 1:
            raise ShapeError("at least one factor matrix is required")
        for f in facs:
            if f.ndim != 2 or f.shape[1] != w.shape[0]:
                raise ShapeError("factor matrices must be n_k x r")
            if np.abs(np.linalg.norm(f, axis=0) - 1.0).max(initial=0.0) > UNIT_TOL:
                raise ValueError("factor columns must have unit norm")
        if not (w > 0).all():
            raise ValueError("weights must be positive")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "factors", tuple(_frozen(f) for f in facs))

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def term(self, j: int) -> Rank1Term:
        return Rank1Term(self.weights[j], tuple(f[:, j] for f in self.factors))

    @classmethod
    def from_terms(cls, terms: Sequence[Rank1Term]) -> "CPDModel":
        weights = [t.weight for t in terms]
        d = len(terms[0].vectors)
        factors = [np.column_stack([t.vectors[k] for t in terms]) for k in range(d)]
        return cls(weights, factors)

    @classmethod
    def from_factors(cls, factors, weights=None) -> "CPDModel":
        """Normalize arbitrary factor columns, absorbing norms into the weights.

        A negative supplied weight is made positive by flipping the sign of
        the first factor column.
        """
        facs = [np.array(f, dtype=float, copy=True) for f in factors]
        r = facs[0].shape[1]
        w = np.ones(r) if weights is None else np.array(weights, dtype=float)
        for f in facs:
            norms = np.linalg.norm(f, axis=0)
            if (norms == 0).any():
                raise ValueError("zero factor column")
            f /= norms
            w = w * norms
        neg = w < 0
        facs[0][:, neg] *= -1
        return cls(np.abs(w), facs)


def outer_rank1(term: Rank1Term) -> np.ndarray:
    """Dense ``weight * a_1 (x) ... (x) a_d``."""
    out = np.array(term.weight)
    for v in term.vectors:
        out = np.multiply.outer(out, v)
    return out


def _check_index(model: CPDModel, index) -> tuple:
    index = tuple(int(i) for i in index)
    if len(index) != model.ndim:
        raise IndexError(f"expected {model.ndim} indices, got {len(index)}")
    for i, n in zip(index, model.shape):
        if not 0 <= i < n:
            raise IndexError(f"index {index} out of range for shape {model.shape}")
    return index


def cpd_entry(model: CPDModel, index) -> float:
    """``sum_j w_j prod_k U_k[i_k, j]`` for one 0-based index tuple."""
    index = _check_index(model, index)
    rows = model.weights.copy()
    for f, i in zip(model.factors, index):
        rows = rows * f[i]
    return float(rows.sum())


def cpd_entries(model: CPDModel, indices: np.ndarray) -> np.ndarray:
    """Vectorized :func:`cpd_entry` over an ``(m, d)`` index array."""
    indices = np.asarray(indices, dtype=np.int64)
    prods = np.broadcast_to(model.weights, (indices.shape[0], model.rank)).copy()
    for k, f in enumerate(model.factors):
        prods *= f[indices[:, k]]
    return prods.sum(axis=1)


def khatri_rao(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product; rows follow row-major order of the inputs."""
    out = mats[0]
    r = out.shape[1]
    for m in mats[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, r)
    return out


def cpd_reconstruct(model: CPDModel) -> np.ndarray:
    first = model.factors[0] * model.weights
    if model.ndim == 1:
        return first.sum(axis=1)
    kr = khatri_rao(list(model.factors[1:]))
    return (first @ kr.T).reshape(model.shape)


def frobenius_norm(tensor) -> float:
    return float(np.linalg.norm(np.asarray(tensor, dtype=float).reshape(-1)))


def _check_shapes(obs: SparseObservations, model: CPDModel):
    if tuple(obs.shape) != model.shape:
        raise ShapeError(f"observation shape {obs.shape} != model shape {model.shape}")


def masked_residual(obs: SparseObservations, model: CPDModel) -> SparseObservations:
    """Observed values minus the model, on the observed index set."""
    _check_shapes(obs, model)
    return obs.with_values(obs.values - cpd_entries(model, obs.indices))


def sparse_mttkrp(indices, values, factors, mode: int, n_rows: int) -> np.ndarray:
    """Sparse MTTKRP: contract coordinate data with every factor except ``mode``."""
    r = factors[0].shape[1]
    out = np.zeros((n_rows, r))
    if len(values) == 0:
        return out
    prods = np.repeat(np.asarray(values, dtype=float)[:, None], r, axis=1)
    for k, f in enumerate(factors):
        if k != mode:
            prods *= f[indices[:, k]]
    rows = indices[:, mode]
    for j in range(r):
        out[:, j] = np.bincount(rows, weights=prods[:, j], minlength=n_rows)
    return out


def dense_mttkrp(tensor: np.ndarray, factors, mode: int) -> np.ndarray:
    """Dense MTTKRP via the mode unfolding and a Khatri-Rao product."""
    others = [f for k, f in enumerate(factors) if k != mode]
    unfolded = np.moveaxis(tensor, mode, 0).reshape(tensor.shape[mode], -1)
    return unfolded @ khatri_rao(others)


def contract_residual(res: SparseObservations, model: CPDModel, mode: int) -> np.ndarray:
    """``n_mode x r`` contraction of a sparse residual with the off-mode factors."""
    _check_shapes(res, model)
    if not 0 <= mode < model.ndim:
        raise ShapeError(f"mode {mode} out of range")
    return sparse_mttkrp(res.indices, res.values, model.factors, mode, model.shape[mode])
