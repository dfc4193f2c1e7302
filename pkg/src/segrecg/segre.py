"""Riemannian geometry of the Segre manifold and its r-fold product.

A point of the Segre manifold is a rank-1 tensor ``lam * x_1 (x) ... (x) x_d``
with ``lam > 0`` and unit vectors ``x_i``. Tangent vectors are coordinate
velocities ``(dlam, dx_1, ..., dx_d)`` with ``dx_i`` orthogonal to ``x_i``,
and the metric induced by the ambient Frobenius inner product is

    <u, v>_p = dlam_u dlam_v + lam^2 sum_i <dx_i_u, dx_i_v>.

The r-fold product is stored as a :class:`CPDModel` (weights and oblique
factor matrices) with tangents :class:`CPDTangent`; the product metric is
the sum of the per-term metrics. Every operation here works column-wise,
so single points are handled as the ``r = 1`` case.

Vector transport is the orthogonal projection of the embedded tangent at
the old point onto the tangent space at the new point. That is our reading
of "project the ambient parallel transport" and is exact for the ambient
(Euclidean) connection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import CPDModel, Rank1Term, ShapeError, dense_mttkrp

ZERO_TOL = 1e-12
LAMBDA_MIN = 1e-12
TANGENCY_TOL = 1e-10

SegrePoint = Rank1Term
ProductPoint = CPDModel


class ApexError(ArithmeticError):
    """A geodesic reached the cone apex ``lam <= LAMBDA_MIN``.

    ``t_critical`` is the smallest step length (per term, ``nan`` for terms
    that do not hit the apex) at which this happens; callers shrink their
    step below it.
    """

    def __init__(self, t_critical):
        self.t_critical = np.atleast_1d(np.asarray(t_critical, dtype=float))
        super().__init__(f"geodesic reaches the cone apex at t = {np.nanmin(self.t_critical):.6g}")


@dataclass(frozen=True)
class SegreTangent:
    dweight: float
    dvectors: tuple

    def __post_init__(self):
        object.__setattr__(self, "dweight", float(self.dweight))
        object.__setattr__(
            self, "dvectors", tuple(np.array(v, dtype=float).reshape(-1) for v in self.dvectors)
        )


@dataclass(frozen=True)
class CPDTangent:
    """Tangent vector at a :class:`CPDModel`: one ``SegreTangent`` per column."""

    dweights: np.ndarray
    dfactors: tuple

    def __post_init__(self):
        object.__setattr__(self, "dweights", np.array(self.dweights, dtype=float).reshape(-1))
        object.__setattr__(self, "dfactors", tuple(np.array(f, dtype=float) for f in self.dfactors))

    @classmethod
    def zeros_like(cls, p: CPDModel) -> "CPDTangent":
        return cls(np.zeros(p.rank), [np.zeros_like(f) for f in p.factors])

    def __add__(self, other):
        return CPDTangent(self.dweights + other.dweights,
                          [a + b for a, b in zip(self.dfactors, other.dfactors)])

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, c):
        return CPDTangent(self.dweights * c, [f * c for f in self.dfactors])

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def column(self, j: int) -> SegreTangent:
        return SegreTangent(self.dweights[j], tuple(f[:, j] for f in self.dfactors))


def _point_columns(p):
    if isinstance(p, CPDModel):
        return p
    return CPDModel([p.weight], [v[:, None] for v in p.vectors])


def _tangent_columns(u):
    if isinstance(u, CPDTangent):
        return u
    return CPDTangent([u.dweight], [v[:, None] for v in u.dvectors])


def _as_segre_tangent(u: CPDTangent) -> SegreTangent:
    return u.column(0)


def _check_tangent(p: CPDModel, u: CPDTangent):
    if len(u.dfactors) != p.ndim or u.dweights.shape != p.weights.shape:
        raise ShapeError("tangent does not match point")
    for x, dx in zip(p.factors, u.dfactors):
        if dx.shape != x.shape:
            raise ShapeError("tangent does not match point")
        overlap = np.abs((x * dx).sum(axis=0))
        if (overlap > TANGENCY_TOL * (1.0 + np.linalg.norm(dx, axis=0))).any():
            raise ValueError("vector is not tangent: <dx_i, x_i> != 0")


# -- metric -----------------------------------------------------------------

def column_inner(p: CPDModel, u: CPDTangent, v: CPDTangent) -> np.ndarray:
    """Per-term metric inner products, shape ``(r,)``."""
    s = sum((a * b).sum(axis=0) for a, b in zip(u.dfactors, v.dfactors))
    return u.dweights * v.dweights + p.weights ** 2 * s


def inner(p: CPDModel, u: CPDTangent, v: CPDTangent) -> float:
    """Product-manifold metric."""
    return float(column_inner(p, u, v).sum())


def norm(p: CPDModel, u: CPDTangent) -> float:
    return float(np.sqrt(max(inner(p, u, u), 0.0)))


def metric_inner(p, u, v) -> float:
    """Induced metric at ``p``; accepts single Segre or product points."""
    pc, uc, vc = _point_columns(p), _tangent_columns(u), _tangent_columns(v)
    _check_tangent(pc, uc)
    _check_tangent(pc, vc)
    return inner(pc, uc, vc)


# -- embedding and projection ------------------------------------------------

def embed_tangent(p, u) -> np.ndarray:
    """Ambient tensor ``dlam (x)x + lam sum_k x_1 (x) .. dx_k .. (x) x_d`` summed over terms."""
    pc, uc = _point_columns(p), _tangent_columns(u)
    _check_tangent(pc, uc)
    out = np.zeros(pc.shape)
    d = pc.ndim
    for j in range(pc.rank):
        x = [f[:, j] for f in pc.factors]
        out += outer_rank1_raw(uc.dweights[j], x)
        for k in range(d):
            vecs = list(x)
            vecs[k] = uc.dfactors[k][:, j]
            out += outer_rank1_raw(pc.weights[j], vecs)
    return out


def outer_rank1_raw(weight, vectors) -> np.ndarray:
    out = np.array(float(weight))
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


def orthogonalize(p: CPDModel, u: CPDTangent) -> CPDTangent:
    """Remove the components of ``dx_i`` along ``x_i``."""
    dfs = [dx - (dx * x).sum(axis=0) * x for x, dx in zip(p.factors, u.dfactors)]
    return CPDTangent(u.dweights, dfs)


def tangent_from_contractions(p: CPDModel, contractions) -> CPDTangent:
    """Assemble the projected tangent from mode contractions of an ambient tensor.

    ``contractions[k]`` is the ``n_k x r`` matrix whose column ``j`` is the
    ambient tensor contracted with ``x_m^j`` on every mode ``m != k``.
    """
    x0 = p.factors[0]
    dw = (contractions[0] * x0).sum(axis=0)
    dfs = []
    for x, w in zip(p.factors, contractions):
        dfs.append((w - (w * x).sum(axis=0) * x) / p.weights)
    return CPDTangent(dw, dfs)


def project(p: CPDModel, Z: np.ndarray) -> CPDTangent:
    Z = np.asarray(Z, dtype=float)
    if Z.shape != p.shape:
        raise ShapeError(f"ambient tensor shape {Z.shape} != point shape {p.shape}")
    return tangent_from_contractions(p, [dense_mttkrp(Z, p.factors, k) for k in range(p.ndim)])


def project_to_tangent(q, Z):
    """Orthogonal projection of an ambient tensor onto the tangent space at ``q``."""
    if isinstance(q, CPDModel):
        return project(q, Z)
    return _as_segre_tangent(project(_point_columns(q), Z))


# -- geodesics ---------------------------------------------------------------

def angle_parameter(lam, P, t):
    """Angle travelled on the sphere product after arc length ``t``.

    Equal to ``atan(sqrt(P^2 + 1) t / lam + P) - atan(P)``, evaluated
    through the tangent subtraction identity so that it stays accurate
    (and continuous past ``pi/2``) for large ``|P|``.
    """
    return np.arctan2(t, lam * np.sqrt(P * P + 1.0) + P * t)


def _apex_time(lam, dlam, s, radial, t):
    """Smallest |t'| <= |t| in the direction of ``t`` where lam(t') <= LAMBDA_MIN, else nan."""
    sign = np.sign(t)
    tc = np.full(np.shape(lam), np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        # radial: lam + dlam t = LAMBDA_MIN
        rad_t = (LAMBDA_MIN - lam) / dlam
        # general: t^2 + 2 lam s t + lam^2 - LAMBDA_MIN^2 = 0
        disc = (lam * s) ** 2 - lam ** 2 + LAMBDA_MIN ** 2
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
        cand = np.where(sign >= 0, -lam * s - root, -lam * s + root)
    cand = np.where(radial, rad_t, cand)
    ok = np.isfinite(cand) & (cand * sign > 0) & (np.abs(cand) <= np.abs(t))
    tc[ok] = cand[ok]
    return tc


def _geodesic_columns(p: CPDModel, v: CPDTangent, t) -> CPDModel:
    lam = p.weights
    dlam = v.dweights
    t = np.broadcast_to(np.asarray(t, dtype=float), lam.shape)
    dnorms = np.array([np.linalg.norm(dx, axis=0) for dx in v.dfactors])  # (d, r)
    M = np.sqrt((dnorms ** 2).sum(axis=0))
    radial = M < ZERO_TOL
    Msafe = np.where(radial, 1.0, M)
    P = np.where(radial, 0.0, dlam / (lam * Msafe))
    # P / sqrt(P^2 + 1), written to avoid overflow of P^2
    s = np.where(radial, np.sign(dlam), dlam / np.sqrt(dlam ** 2 + (lam * Msafe) ** 2))

    lam_sq = t * t + 2.0 * lam * s * t + lam ** 2
    lam_t = np.where(radial, lam + dlam * t, np.sqrt(np.maximum(lam_sq, 0.0)))
    tc = _apex_time(lam, dlam, s, radial, t)
    if (lam_t <= LAMBDA_MIN).any() or np.isfinite(tc).any():
        raise ApexError(tc)

    f = np.where(radial, 0.0, angle_parameter(lam, P, t))
    factors = []
    for k, (x, dx) in enumerate(zip(p.factors, v.dfactors)):
        nk = dnorms[k]
        moving = (nk >= ZERO_TOL) & ~radial
        theta = np.where(moving, nk / Msafe * f, 0.0)
        direction = np.where(moving, dx / np.where(moving, nk, 1.0), 0.0)
        y = x * np.cos(theta) + direction * np.sin(theta)
        factors.append(y / np.linalg.norm(y, axis=0))
    return CPDModel(lam_t, factors)


def geodesic(p, v, t):
    """Point at arc length ``t`` on the unit-speed geodesic from ``p`` along ``v``.

    For a product point, ``v`` must have unit speed in every column and
    ``t`` may be a scalar or one value per term. Raises :class:`ApexError`
    if the radial coordinate would drop to ``LAMBDA_MIN``.
    """
    pc, vc = _point_columns(p), _tangent_columns(v)
    _check_tangent(pc, vc)
    speeds = column_inner(pc, vc, vc)
    if np.abs(speeds - 1.0).max() > 1e-8:
        raise ValueError("geodesic expects a unit-speed direction")
    out = _geodesic_columns(pc, vc, t)
    return out if isinstance(p, CPDModel) else out.term(0)


def exp_map(p: CPDModel, u: CPDTangent) -> CPDModel:
    """Exponential map on the product manifold, column by column."""
    speeds = np.sqrt(np.maximum(column_inner(p, u, u), 0.0))
    moving = speeds > 0
    if not moving.any():
        return p
    scale = np.where(moving, speeds, 1.0)
    unit = CPDTangent(u.dweights / scale, [f / scale for f in u.dfactors])
    # stationary columns get a harmless radial unit direction and t = 0
    unit = CPDTangent(np.where(moving, unit.dweights, 1.0), unit.dfactors)
    return _geodesic_columns(p, unit, np.where(moving, speeds, 0.0))


def exp_retract(p, v):
    pc, vc = _point_columns(p), _tangent_columns(v)
    _check_tangent(pc, vc)
    out = exp_map(pc, vc)
    return out if isinstance(p, CPDModel) else out.term(0)


# -- transport ---------------------------------------------------------------

def transport_product(p: CPDModel, q: CPDModel, u: CPDTangent) -> CPDTangent:
    """Project the embedded tangent ``u`` at ``p`` onto the tangent space at ``q``.

    Works term by term with inner products only; the ambient tensor is
    never formed.
    """
    d = p.ndim
    c = np.array([(x * y).sum(axis=0) for x, y in zip(p.factors, q.factors)])  # (d, r)
    e = np.array([(dx * y).sum(axis=0) for dx, y in zip(u.dfactors, q.factors)])

    def prod_except(*skip):
        out = np.ones(p.rank)
        for m in range(d):
            if m not in skip:
                out = out * c[m]
        return out

    lam, dlam = p.weights, u.dweights
    new_dw = dlam * prod_except() + lam * sum(e[k] * prod_except(k) for k in range(d))
    new_df = []
    for k in range(d):
        ck = prod_except(k)
        cross = sum((e[kk] * prod_except(k, kk) for kk in range(d) if kk != k), np.zeros(p.rank))
        w = (dlam * ck + lam * cross) * p.factors[k] + lam * ck * u.dfactors[k]
        y = q.factors[k]
        new_df.append((w - (w * y).sum(axis=0) * y) / q.weights)
    return CPDTangent(new_dw, new_df)


def transport(p, q, u):
    """Vector transport by projection; single points or product points."""
    pc, qc, uc = _point_columns(p), _point_columns(q), _tangent_columns(u)
    _check_tangent(pc, uc)
    out = transport_product(pc, qc, uc)
    return out if isinstance(p, CPDModel) else _as_segre_tangent(out)


# -- random points -------------------------------------------------------------

def random_point(shape, r: int, scale: float = 1.0, seed=None) -> CPDModel:
    """Unit factor columns from normalized Gaussians, weights ``scale * U[0.5, 1.5]``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    factors = []
    for n in shape:
        g = rng.standard_normal((int(n), r))
        factors.append(g / np.linalg.norm(g, axis=0))
    weights = scale * rng.uniform(0.5, 1.5, size=r)
    return CPDModel(weights, factors)


def random_tangent(p: CPDModel, rng=None, unit: bool = False) -> CPDTangent:
    rng = np.random.default_rng(rng)
    u = orthogonalize(p, CPDTangent(rng.standard_normal(p.rank),
                                    [rng.standard_normal(f.shape) for f in p.factors]))
    if unit:
        speeds = np.sqrt(column_inner(p, u, u))
        u = CPDTangent(u.dweights / speeds, [f / speeds for f in u.dfactors])
    return u
