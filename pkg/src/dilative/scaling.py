"""Membership checks for the dilative decomposability group.

``T`` belongs to the group of ``(alpha, delta)`` when

    psi_{T t_1, ..., T t_k}(theta) == T**delta * psi_{t_1, ..., t_k}(T**(alpha - delta/2) theta)

for every query. On a computer this is evidence over a finite grid, so every
report keeps both sides at each point for audit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .charfn import EmpiricalModel, FinDimQuery, LogCFModel, psi
from .errors import InvalidGamma, InvalidParams, PrereqFailed

GRID_TIMES = (0.25, 0.5, 1.0, 2.0, 4.0)
LEVY_TOL = 1e-8
GFLP_TOL = 1e-5
ZBETA_TOL = 1e-3


@dataclass(frozen=True)
class DilativeParams:
    alpha: float
    delta: float
    c: float | None = None

    def __post_init__(self):
        if self.c is not None and not self.c > 1:
            raise InvalidParams(f"c={self.c} must exceed 1", "DilativeParams")
        if not (math.isfinite(self.alpha) and math.isfinite(self.delta)):
            raise InvalidParams("alpha and delta must be finite", "DilativeParams")

    @property
    def theta_exponent(self) -> float:
        return self.alpha - self.delta / 2.0


@dataclass(frozen=True)
class PointResidual:
    query: FinDimQuery
    lhs: complex
    rhs: complex
    residual: float
    stderr: float = 0.0


@dataclass(frozen=True)
class ScalingReport:
    T: float
    sup_residual: float
    per_point: tuple[PointResidual, ...]
    tolerance: float
    relative: bool = False

    @property
    def verdict(self) -> bool:
        return self.sup_residual <= self.tolerance

    @property
    def witness(self) -> PointResidual:
        """The grid point attaining the largest residual."""
        return max(self.per_point, key=lambda p: p.residual)


def default_grid(k_max: int = 3, times: Sequence[float] = GRID_TIMES) -> list[FinDimQuery]:
    """Compact verification grid with ``k <= k_max`` and times drawn from ``times``."""
    times = tuple(sorted(times))
    grid = [FinDimQuery((t,), (th,)) for t in times for th in (0.2, -0.5, 1.0)]
    if k_max >= 2:
        pairs = list(zip(times[:-1], times[1:]))
        grid += [FinDimQuery(p, th) for p in pairs for th in ((0.5, -0.2), (-1.0, 0.5), (0.2, 1.0))]
    if k_max >= 3 and len(times) >= 3:
        mid = len(times) // 2
        triples = [(times[0], times[mid], times[-1]), tuple(times[mid - 1 : mid + 2])]
        grid += [FinDimQuery(tr, th) for tr in triples for th in ((0.2, -0.5, 1.0), (-1.0, 0.5, -0.2))]
    return grid


def _evaluate(model, q):
    if isinstance(model, EmpiricalModel):
        est = model.estimate(q)
        return est.value, est.stderr
    return psi(model, q), 0.0


def dilative_residual(
    model: LogCFModel,
    T: float,
    p: DilativeParams,
    grid: Sequence[FinDimQuery] | None = None,
    tol: float = LEVY_TOL,
    relative: bool = False,
) -> ScalingReport:
    """Sup over the grid of ``|psi_{Tt}(theta) - T**delta psi_t(T**(alpha - delta/2) theta)|``.

    With ``relative=True`` each residual is divided by ``1 + |lhs|``. For an
    empirical model the tolerance is taken per point as ``3 * stderr`` when
    that is larger than ``tol``.
    """
    if not T > 0:
        raise InvalidParams(f"scale T={T} must be positive", "dilative_residual")
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise InvalidParams("verification grid is empty", "dilative_residual")
    factor = T**p.delta
    theta_factor = T**p.theta_exponent
    points = []
    worst = 0.0
    for q in grid:
        if T == 1.0:
            lhs, se = _evaluate(model, q)
            rhs, se2 = lhs, se
        else:
            lhs, se = _evaluate(model, q.dilated(T))
            base, se2 = _evaluate(model, q.dilated(1.0, theta_factor))
            rhs = factor * base
            se2 = factor * se2
        diff = abs(lhs - rhs)
        if relative:
            diff /= 1.0 + abs(lhs)
        stderr = math.hypot(se, se2)
        points.append(PointResidual(q, complex(lhs), complex(rhs), diff, stderr))
        # empirical points are measured against their own noise level
        excess = diff if stderr == 0.0 else diff * tol / max(tol, 3.0 * stderr)
        worst = max(worst, excess)
    return ScalingReport(float(T), worst, tuple(points), tol, relative)


def group_membership(model, T, p, tol=LEVY_TOL, grid=None, relative=False) -> bool:
    return dilative_residual(model, T, p, grid, tol, relative).verdict


@dataclass(frozen=True)
class ClosureReport:
    b: ScalingReport
    c: ScalingReport
    bc: ScalingReport

    @property
    def verdict(self) -> bool:
        return self.bc.verdict


def closure_product_check(model, b, c, p, tol=LEVY_TOL, grid=None, relative=False) -> ClosureReport:
    """If ``b`` and ``c`` are members at ``tol``, check ``b * c`` at ``3 * tol``."""
    rb = dilative_residual(model, b, p, grid, tol, relative)
    rc = dilative_residual(model, c, p, grid, tol, relative)
    for name, r in (("b", rb), ("c", rc)):
        if not r.verdict:
            raise PrereqFailed(
                f"{name}={r.T} is not a member: residual {r.sup_residual:.3e} > {tol:.1e}",
                "closure_product_check",
            )
    rbc = dilative_residual(model, b * c, p, grid, 3.0 * tol, relative)
    return ClosureReport(rb, rc, rbc)


def semistable_alpha(gamma: float, delta: float) -> float:
    """``(1 - delta)/gamma + delta/2``: the alpha paired with ``delta`` for a semistable Lévy process."""
    if not 0.0 < gamma < 2.0:
        raise InvalidGamma(f"gamma={gamma} outside (0, 2)", "semistable_alpha")
    return (1.0 - delta) / gamma + delta / 2.0


def incommensurable(b: float, c: float, depth: int = 50, tol: float = 1e-12) -> bool:
    """True unless ``b**n == c**m`` for some ``0 < max(|n|, |m|) <= depth``.

    Scans the continued-fraction convergents ``m/n`` of ``ln b / ln c`` and
    accepts a relation when ``|n ln b - m ln c| <= tol * max(n ln b, 1)``.
    """
    if not (b > 1 and c > 1):
        raise InvalidParams("b and c must exceed 1", "incommensurable")
    if depth < 1:
        raise InvalidParams("depth must be positive", "incommensurable")
    lb, lc = math.log(b), math.log(c)
    x = lb / lc
    h0, h1 = 0, 1  # numerators
    k0, k1 = 1, 0  # denominators
    rest = x
    while True:
        a = math.floor(rest)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        m, n = h1, k1  # x ~ m/n, i.e. b**n ~ c**m
        if max(abs(m), abs(n)) > depth:
            return True
        if abs(n * lb - m * lc) <= tol * max(n * lb, 1.0):
            return False
        frac = rest - a
        if frac <= 0.0:
            return False
        rest = 1.0 / frac
        if not math.isfinite(rest):
            return True
