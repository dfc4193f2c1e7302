"""Riemannian conjugate gradient with geodesic steps.

Each iteration computes the Riemannian gradient, transports the previous
gradient and search direction to the current point by projection, forms a
Hestenes-Stiefel direction, picks a step by quadratic interpolation
(falling back to Armijo backtracking), and moves along the geodesics of
every rank-1 term.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .objectives import ObjectiveSpec, objective, riemannian_gradient
from .segre import ApexError, CPDTangent, exp_map, inner, norm, orthogonalize, transport_product
from .tensor_core import CPDModel

log = logging.getLogger(__name__)

STEP_BOUNDS = (1e-8, 1e8)


class BetaRule(str, Enum):
    HESTENES_STIEFEL = "hestenes_stiefel"
    STEEPEST_DESCENT = "steepest_descent"


@dataclass(frozen=True)
class OptimizerConfig:
    grad_tol: float = 1e-6
    max_iters: int = 1000
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 25
    initial_step: float = 1.0
    beta_rule: BetaRule = BetaRule.HESTENES_STIEFEL
    restart_on_nondescent: bool = True

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        object.__setattr__(self, "beta_rule", BetaRule(self.beta_rule))


class LineSearchStall(RuntimeError):
    """No step satisfying the Armijo condition was found."""


@dataclass
class LineSearchResult:
    alpha: float
    f_new: float
    point: CPDModel
    evals: int
    extra_evals: int
    method: str


@dataclass
class FitReport:
    model: CPDModel
    iterations: int
    objective: list
    grad_norm: list
    step: list
    beta: list
    wall_time: list
    evals: list
    termination: str

    @property
    def final_objective(self) -> float:
        return self.objective[-1]

    @property
    def relative_grad_norm(self) -> list:
        g0 = self.grad_norm[0] if self.grad_norm[0] > 0 else 1.0
        return [g / g0 for g in self.grad_norm]

    def to_dict(self, include_time: bool = True) -> dict:
        out = {
            "iterations": self.iterations,
            "termination": self.termination,
            "trace": {
                "objective": self.objective,
                "grad_norm": self.grad_norm,
                "relative_grad_norm": self.relative_grad_norm,
                "step": self.step,
                "beta": self.beta,
                "evals": self.evals,
            },
        }
        if include_time:
            out["trace"]["wall_time"] = self.wall_time
        return out


def hs_beta(g_new: CPDTangent, g_old_t: Optional[CPDTangent], d_old_t: Optional[CPDTangent],
            p: CPDModel) -> float:
    """Hestenes-Stiefel coefficient, clamped at zero.

    Returns 0 (a restart) without history or when ``<d_old, y>`` is
    negligible.
    """
    if g_old_t is None or d_old_t is None:
        return 0.0
    y = g_new - g_old_t
    num = inner(p, g_new, y)
    den = inner(p, d_old_t, y)
    if abs(den) < 1e-15 * (1.0 + inner(p, g_new, g_new)):
        return 0.0
    return max(0.0, num / den)


def quad_step(f0: float, f1: float, f2: float) -> Optional[float]:
    """Minimizer of the parabola through ``(0, f0), (1, f1), (2, f2)``.

    Returns ``None`` when the parabola has no minimum (denominator <= 0).
    """
    den = 2.0 * f0 - 4.0 * f1 + 2.0 * f2
    if not np.isfinite(den) or den <= 0:
        return None
    return (3.0 * f0 - 4.0 * f1 + f2) / den


def armijo_ok(f0: float, f_alpha: float, alpha: float, slope: float, c: float) -> bool:
    return bool(np.isfinite(f_alpha) and f_alpha <= f0 + c * alpha * slope)


def line_search(p: CPDModel, direction: CPDTangent, f0: float, slope: float,
                fun: Callable[[CPDModel], float], config: OptimizerConfig, *,
                interpolate: bool = True, step: Optional[float] = None) -> LineSearchResult:
    """Step along ``exp_p(alpha * direction)`` satisfying the Armijo condition.

    With ``interpolate`` the objective is probed at ``step`` and
    ``2 * step`` and the parabola's minimizer is tried first; otherwise
    (or if that fails) plain backtracking from ``step`` is used. Probes
    that would cross the cone apex shrink the step.

    ``evals`` counts every objective call. ``extra_evals`` leaves out the
    call made solely to evaluate the accepted point, whose value the
    optimizer reuses as its next current value.
    """
    if not slope < 0:
        raise ValueError("direction is not a descent direction")
    s = config.initial_step if step is None else float(step)
    c = config.armijo_c
    evals = 0

    def probe(alpha):
        nonlocal evals
        q = exp_map(p, direction * alpha)
        value = fun(q)
        evals += 1
        return q, value

    cached = {}
    if interpolate:
        for _ in range(config.max_backtracks):
            try:
                cached[1.0] = probe(s)
                cached[2.0] = probe(2.0 * s)
                break
            except ApexError:
                cached.clear()
                s *= config.backtrack_factor
        else:
            raise LineSearchStall("apex crossed on every interpolation probe")
        a = quad_step(f0, cached[1.0][1], cached[2.0][1])
        if a is not None and np.isfinite(a) and a > 0:
            fresh = a not in cached
            try:
                q, value = cached[a] if not fresh else probe(a * s)
            except ApexError:
                q, value = None, np.inf
            if armijo_ok(f0, value, a * s, slope, c):
                return LineSearchResult(a * s, value, q, evals, evals - int(fresh), "interpolation")

    alpha = s
    for _ in range(config.max_backtracks):
        fresh = not (alpha == s and 1.0 in cached)
        try:
            q, value = probe(alpha) if fresh else cached[1.0]
        except ApexError:
            q, value = None, np.inf
        if armijo_ok(f0, value, alpha, slope, c):
            return LineSearchResult(alpha, value, q, evals, evals - int(fresh), "backtracking")
        alpha *= config.backtrack_factor
    raise LineSearchStall(f"Armijo condition not met after {config.max_backtracks} backtracks")


def minimize(start: CPDModel, spec: ObjectiveSpec, config: OptimizerConfig = OptimizerConfig(),
             callback: Optional[Callable] = None) -> FitReport:
    """Minimize ``objective(., spec)`` over the product of Segre manifolds from ``start``."""
    fun = lambda q: objective(q, spec)  # noqa: E731
    interpolate = not spec.penalized
    t0 = time.perf_counter()

    p = start
    f = fun(p)
    g = riemannian_gradient(p, spec)
    gn = norm(p, g)
    report = FitReport(p, 0, [f], [gn], [0.0], [0.0], [0.0], [1], "grad_tol")
    if gn < config.grad_tol:
        return report

    d = -g
    step = config.initial_step / gn
    for it in range(1, config.max_iters + 1):
        slope = inner(p, g, d)
        if not slope < 0:
            if not config.restart_on_nondescent:
                report.termination = "nondescent"
                break
            d, slope = -g, -gn * gn
        try:
            ls = line_search(p, d, f, slope, fun, config, interpolate=interpolate, step=step)
        except LineSearchStall as exc:
            log.info("iteration %d: %s", it, exc)
            report.termination = "stall"
            break

        q = ls.point
        g_new = riemannian_gradient(q, spec)
        beta = 0.0
        if config.beta_rule is BetaRule.HESTENES_STIEFEL:
            g_t = orthogonalize(q, transport_product(p, q, g))
            d_t = orthogonalize(q, transport_product(p, q, d))
            beta = hs_beta(g_new, g_t, d_t, q)
            d = -g_new + beta * d_t if beta > 0 else -g_new
        else:
            d = -g_new
        p, f, g = q, ls.f_new, g_new
        gn = norm(p, g)
        alpha = ls.alpha if interpolate else ls.alpha / config.backtrack_factor
        step = float(np.clip(alpha, *STEP_BOUNDS))

        report.model = p
        report.iterations = it
        report.objective.append(f)
        report.grad_norm.append(gn)
        report.step.append(ls.alpha)
        report.beta.append(beta)
        report.wall_time.append(time.perf_counter() - t0)
        report.evals.append(ls.evals)
        if callback is not None:
            callback(it, p, f, gn)
        if gn < config.grad_tol:
            report.termination = "grad_tol"
            break
    else:
        report.termination = "max_iters"
    return report
