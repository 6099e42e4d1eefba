"""Kernel functions ``f(t, u)`` for generalized fractional Lévy processes.

A kernel declares scaling metadata ``(alpha, delta)``: it is homogeneous when
``f(T t, T**delta u) == T**(alpha - delta/2) f(t, u)`` for every ``T > 0``.
:class:`StepDiscretized` snaps a homogeneous kernel onto the geometric lattice
``(c**m, +-c**(delta j))`` and keeps the identity only for ``T`` in ``c**Z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidKappa, InvalidParams, NonConvergent
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate

VALIDATION_TIMES = (0.5, 1.0, 2.0)
_VALIDATION_SPEC = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-10, max_subdivisions=4096)


def eval_fractional(kappa: float, t: float, u):
    """``(t - u)_+**kappa - (-u)_+**kappa``."""
    if not 0.0 < kappa < 0.5:
        raise InvalidKappa(f"kappa={kappa} outside (0, 1/2)", "eval_fractional")
    u = np.asarray(u, dtype=float)
    out = np.maximum(t - u, 0.0) ** kappa - np.maximum(-u, 0.0) ** kappa
    # both terms positive: difference of nearly equal powers when |u| >> |t|
    both = (u < 0.0) & (t - u > 0.0)
    if np.any(both):
        w = -u[both] if out.ndim else -float(u)
        stable = w**kappa * np.expm1(kappa * np.log1p(t / w))
        if out.ndim:
            out[both] = stable
        else:
            out = np.asarray(stable)
    return float(out) if out.ndim == 0 else out


def floor_log(x, base: float):
    """Integer ``m`` with ``base**m <= x < base**(m+1)``, robust at lattice points."""
    x = np.asarray(x, dtype=float)
    m = np.floor(np.log(x) / math.log(base))
    for _ in range(2):
        m = np.where(base ** (m + 1) <= x, m + 1, m)
        m = np.where(base**m > x, m - 1, m)
    return m


class Kernel:
    # subclasses provide alpha and delta; lattice kernels also provide c
    # 'real' (any t), 'nonneg' (t >= 0) or 'positive' (t > 0)
    time_domain = "real"
    piecewise_constant = False

    def __call__(self, t: float, u):
        raise NotImplementedError

    def breakpoints(self, t: float) -> list[float]:
        """Locations in ``u`` where ``f(t, .)`` is not smooth."""
        return []

    def check_time(self, t: float, operation: str = "kernel"):
        if self.time_domain == "positive" and not t > 0:
            raise DomainError(f"kernel needs t > 0, got {t}", operation)
        if self.time_domain == "nonneg" and not t >= 0:
            raise DomainError(f"kernel needs t >= 0, got {t}", operation)

    def validate(self, times: Sequence[float] = VALIDATION_TIMES):
        for t in times:
            l2_norm_sq(self, t, _VALIDATION_SPEC)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Fractional(Kernel):
    kappa: float

    def __post_init__(self):
        if not 0.0 < self.kappa < 0.5:
            raise InvalidKappa(f"kappa={self.kappa} outside (0, 1/2)", "Fractional")

    @property
    def alpha(self):
        return self.kappa + 0.5

    @property
    def delta(self):
        return 1.0

    def __call__(self, t, u):
        return eval_fractional(self.kappa, t, u)

    def breakpoints(self, t):
        return sorted({0.0, float(t)})

    def describe(self):
        return {"type": "fractional", "kappa": self.kappa}


@dataclass(frozen=True)
class Indicator(Kernel):
    """``1_[0, t)(u)`` for ``t >= 0`` and ``-1_[t, 0)(u)`` for ``t < 0``: gives back the driver itself."""

    alpha = 0.5
    delta = 1.0

    def __call__(self, t, u):
        u = np.asarray(u, dtype=float)
        if t >= 0:
            out = ((u >= 0.0) & (u < t)).astype(float)
        else:
            out = -((u >= t) & (u < 0.0)).astype(float)
        return float(out) if out.ndim == 0 else out

    def breakpoints(self, t):
        return sorted({0.0, float(t)})

    def describe(self):
        return {"type": "indicator"}


@dataclass(frozen=True)
class Homogeneous(Kernel):
    """``f(t, u) = t**(alpha - delta/2) * profile(u / t**delta)`` for ``t > 0``."""

    alpha: float
    delta: float
    profile: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    profile_breaks: tuple[float, ...] = ()
    name: str = "homogeneous"
    time_domain = "positive"

    def __post_init__(self):
        if self.delta == 0:
            raise InvalidParams("homogeneous kernels need delta != 0", "Homogeneous")

    def __call__(self, t, u):
        self.check_time(t, "Homogeneous")
        u = np.asarray(u, dtype=float)
        out = t ** (self.alpha - self.delta / 2) * np.asarray(self.profile(u / t**self.delta), dtype=float)
        return float(out) if out.ndim == 0 else out

    def breakpoints(self, t):
        return sorted({float(v) * t**self.delta for v in self.profile_breaks})

    def describe(self):
        return {"type": self.name, "alpha": self.alpha, "delta": self.delta}


@dataclass(frozen=True)
class StepDiscretized(Kernel):
    """``f_c(t, u) = f(c**floor(log_c t), sign(u) c**(delta floor(log_{c**delta} |u|)))``."""

    base: Kernel
    c: float
    delta: float
    validate_l2: bool = field(default=True, compare=False, repr=False)
    time_domain = "positive"
    piecewise_constant = True

    def __post_init__(self):
        if not self.c > 1:
            raise InvalidParams(f"c={self.c} must exceed 1", "StepDiscretized")
        if not self.delta > 0:
            raise InvalidParams(f"delta={self.delta} must be positive", "StepDiscretized")
        if self.base.piecewise_constant:
            raise InvalidParams("base kernel must be homogeneous, not already discretized", "StepDiscretized")
        if abs(self.base.delta - self.delta) > 1e-12:
            raise InvalidParams(
                f"lattice delta={self.delta} differs from the base kernel's delta={self.base.delta}",
                "StepDiscretized",
            )
        if self.validate_l2:
            self.validate()

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def u_base(self) -> float:
        return self.c**self.delta

    def snap_time(self, t: float) -> float:
        self.check_time(t, "eval_fc")
        return float(self.c ** floor_log(t, self.c))

    def snap_u(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u == 0.0):
            raise DomainError("f_c is undefined at u = 0", "eval_fc")
        return np.sign(u) * self.u_base ** floor_log(np.abs(u), self.u_base)

    def __call__(self, t, u):
        out = np.asarray(self.base(self.snap_time(t), self.snap_u(u)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def cells(self, times: Sequence[float], block: int = 64):
        """Yield blocks ``(lengths, values)`` covering u in R minus {0}.

        ``values[i, j]`` is the constant value of ``f_c(times[j], .)`` on cell ``i``.
        Blocks run outward from ``|u| = lowest`` to ``+-infinity``; callers stop
        consuming once contributions are negligible.
        """
        snapped = [self.snap_time(t) for t in times]
        scale = max(s**self.delta for s in snapped)
        q = self.u_base
        j = int(math.floor(math.log(scale * 1e-18) / math.log(q)))
        while True:
            js = np.arange(j, j + block, dtype=float)
            left = q**js
            length = left * (q - 1.0)
            pos = np.stack([np.asarray(self.base(s, left), dtype=float) for s in snapped], axis=1)
            neg = np.stack([np.asarray(self.base(s, -left), dtype=float) for s in snapped], axis=1)
            yield np.concatenate([length, length]), np.concatenate([pos, neg]), left[-1] / scale
            j += block

    def lattice_sum(self, times, cell_integrand, spec: QuadratureSpec = DEFAULT_SPEC, max_blocks: int = 64):
        """``sum_cells length * cell_integrand(values)`` truncated at negligible terms."""
        total = 0.0
        for n, (length, values, reach) in enumerate(self.cells(times)):
            terms = length * np.asarray(cell_integrand(values))
            total = total + terms.sum()
            tail = np.abs(terms[len(terms) // 2 - 8 : len(terms) // 2]).max() + np.abs(terms[-8:]).max()
            if reach > 1e3 and tail < spec.tail_cutoff * max(1.0, abs(total)):
                return total
            if n >= max_blocks:
                raise NonConvergent(
                    f"lattice sum still has terms of size {tail:.3e} at |u| ~ {reach:.3e}; "
                    "f_c is probably not a valid kernel here",
                    "lattice_sum",
                )

    def describe(self):
        return {"type": "step", "c": self.c, "delta": self.delta, "base": self.base.describe()}


def eval_fc(base: Kernel, c: float, delta: float, t: float, u):
    """Evaluate the lattice-snapped kernel built from ``base``."""
    return StepDiscretized(base, c, delta, validate_l2=False)(t, u)


DEFAULT_T_GRID = (0.3, 0.7, 1.0, 1.9, 3.3)
DEFAULT_U_GRID = (-5.3, -2.2, -1.1, -0.45, -0.05, 0.1, 0.6, 1.5, 2.7, 4.2)


def default_grid():
    return [(t, u) for t in DEFAULT_T_GRID for u in DEFAULT_U_GRID]


def check_homogeneity(kernel: Kernel, alpha: float, delta: float, T: float, grid=None) -> float:
    """``sup |f(T t, T**delta u) - T**(alpha - delta/2) f(t, u)|`` over the grid."""
    if not T > 0:
        raise DomainError(f"scale T={T} must be positive", "check_homogeneity")
    grid = default_grid() if grid is None else list(grid)
    factor = T ** (alpha - delta / 2)
    worst = 0.0
    for t, u in grid:
        kernel.check_time(t, "check_homogeneity")
        lhs = kernel(T * t, T**delta * u)
        rhs = factor * kernel(t, u)
        worst = max(worst, abs(lhs - rhs))
    return worst


def l2_norm_sq(kernel: Kernel, t: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``int f(t, u)**2 du`` over the real line; raises NonConvergent if it does not settle."""
    kernel.check_time(t, "l2_norm_sq")
    if isinstance(kernel, StepDiscretized):
        return float(kernel.lattice_sum([t], lambda v: v[:, 0] ** 2, spec))
    res = integrate(lambda u: np.asarray(kernel(t, u)) ** 2, -np.inf, np.inf, spec, kernel.breakpoints(t), log_tails=True)
    return float(res.value)
