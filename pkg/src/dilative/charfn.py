"""Finite-dimensional log-characteristic functions: analytic models and empirical estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import factorial
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BranchUnsafe, DomainError, InvalidParams
from .kernels import Kernel, StepDiscretized
from .levy import LevyExponent, levy_findim_psi, normalize_query
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate

BRANCH_GATE = 0.1


@dataclass(frozen=True)
class FinDimQuery:
    times: tuple[float, ...]
    thetas: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        thetas = tuple(float(x) for x in np.atleast_1d(self.thetas))
        if len(times) != len(thetas):
            raise InvalidParams("times and thetas must have equal length", "FinDimQuery")
        if not times:
            raise InvalidParams("a query needs k >= 1 points", "FinDimQuery")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "thetas", thetas)

    @property
    def k(self) -> int:
        return len(self.times)

    def dilated(self, time_factor: float, theta_factor: float = 1.0) -> "FinDimQuery":
        return FinDimQuery(
            tuple(time_factor * t for t in self.times),
            tuple(theta_factor * x for x in self.thetas),
        )

    def negated(self) -> "FinDimQuery":
        return FinDimQuery(self.times, tuple(-x for x in self.thetas))

    def label(self) -> tuple[str, str]:
        return (";".join(f"{t:.12g}" for t in self.times), ";".join(f"{x:.12g}" for x in self.thetas))


def _check_domain(domain: str, times, operation: str):
    t = np.asarray(times, dtype=float)
    if domain == "nonneg" and np.any(t < 0):
        raise DomainError(f"times must be >= 0, got {t.min()}", operation)
    if domain == "positive" and np.any(t <= 0):
        raise DomainError(f"times must be > 0, got {t.min()}", operation)


class LogCFModel:
    time_domain = "real"

    def psi(self, q: FinDimQuery) -> complex:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LevyModel(LogCFModel):
    exponent: LevyExponent
    time_domain = "nonneg"

    def psi(self, q):
        _check_domain(self.time_domain, q.times, "psi")
        return levy_findim_psi(self.exponent, q.times, q.thetas)

    def describe(self):
        return {"variant": "levy", "exponent": self.exponent.describe()}


@dataclass(frozen=True)
class GFLPModel(LogCFModel):
    """``X_t = int f(t, u) L(du)`` driven by a centred two-sided Lévy process.

    ``psi = int phi(sum_j theta_j f(t_j, u)) du`` with ``phi`` the driver's
    exponent; a unit indicator kernel gives back the Lévy marginal ``t phi``.
    """

    kernel: Kernel
    exponent: LevyExponent
    spec: QuadratureSpec = DEFAULT_SPEC

    @property
    def time_domain(self):
        return self.kernel.time_domain

    def psi(self, q):
        _check_domain(self.time_domain, q.times, "psi")
        times, thetas = normalize_query(q.times, q.thetas)
        if not np.any(thetas):
            return 0j
        if isinstance(self.kernel, StepDiscretized):
            val = self.kernel.lattice_sum(times, lambda v: self.exponent(v @ thetas), self.spec)
            return complex(val)
        points = sorted({p for t in times for p in self.kernel.breakpoints(t)})

        def integrand(u):
            arg = np.zeros_like(u)
            for t, th in zip(times, thetas):
                if th:
                    arg += th * self.kernel(t, u)
            return self.exponent(arg)

        return complex(integrate(integrand, -np.inf, np.inf, self.spec, points, log_tails=True).value)

    def describe(self):
        return {"variant": "gflp", "kernel": self.kernel.describe(), "exponent": self.exponent.describe()}


# coefficients of y - 2(1 - e^-y) + (1 - e^-2y)/2 = sum_n c_n y^n, n >= 3
_K0_SERIES = np.array([(-1) ** (n + 1) * (2 ** (n - 1) - 2) / factorial(n) for n in range(3, 26)])


def _k0(y):
    """``y - 2(1 - exp(-y)) + (1 - exp(-2y))/2``, accurate for small ``y``."""
    y = np.asarray(y, dtype=float)
    small = y < 0.5
    direct = y + 2.0 * np.expm1(-y) - 0.5 * np.expm1(-2.0 * y)
    powers = np.power.outer(np.where(small, y, 0.0), np.arange(3, 26))
    series = powers @ _K0_SERIES
    return np.where(small, series, direct)


def zbeta_inner(x, times, thetas):
    """``int_R (sum_j theta_j h_j(s, x))**2 ds`` in closed form, vectorized over ``x > 0``.

    ``h_j(s, x) = [(1 - e^{(s - t_j) x}) 1{s < t_j} - (1 - e^{s x}) 1{s < 0}] / x``;
    the integrand is a sum of exponentials on each piece between the ``t_j``.
    """
    x = np.asarray(x, dtype=float)
    t, th = normalize_query(times, thetas)
    keep = t > 0
    t, th = t[keep], th[keep]
    if t.size == 0:
        return np.zeros_like(x)
    xx = x[..., None]
    # s < 0: sum_j theta_j h_j = e^{sx} A / x
    A = -(th * np.expm1(-t * xx)).sum(-1)
    total = A * A / (2.0 * x**3)
    left = 0.0
    for i, right in enumerate(t):
        S = th[i:].sum()
        D = -(th[i:] * np.expm1((right - t[i:]) * xx)).sum(-1)
        y = (right - left) * x
        em = np.expm1(-y)
        G2 = -np.expm1(-2.0 * y) / (2.0 * x)
        piece = S * S * _k0(y) / x + S * D * em * em / x + D * D * G2
        total = total + piece / (x * x)
        left = right
    return total


def zbeta_psi(beta: float, C: float, q: FinDimQuery, spec: QuadratureSpec = DEFAULT_SPEC) -> complex:
    """``C int_0^inf (exp(-I(x)/2) - 1) x**beta dx`` with ``I`` from :func:`zbeta_inner`."""
    if not -1.0 < beta < 1.0:
        raise InvalidParams(f"beta={beta} outside (-1, 1)", "zbeta_psi")
    if not C > 0:
        raise InvalidParams(f"C={C} must be positive", "zbeta_psi")
    _check_domain("nonneg", q.times, "zbeta_psi")
    if not any(q.thetas):
        return 0j
    times, thetas = q.times, q.thetas

    # y = x**(1 + beta) absorbs the x**beta singularity at the origin
    p = 1.0 + beta

    def integrand(y):
        x = y ** (1.0 / p)
        return np.expm1(-0.5 * zbeta_inner(x, times, thetas)) / p

    scales = sorted({t ** -p for t in times if t > 0})
    res = integrate(integrand, 0.0, np.inf, spec, scales)
    return complex(C * res.value, 0.0)


@dataclass(frozen=True)
class ZBetaModel(LogCFModel):
    beta: float
    C: float = 1.0
    spec: QuadratureSpec = DEFAULT_SPEC
    time_domain = "nonneg"

    def __post_init__(self):
        if not -1.0 < self.beta < 1.0:
            raise InvalidParams(f"beta={self.beta} outside (-1, 1)", "ZBetaModel")
        if not self.C > 0:
            raise InvalidParams(f"C={self.C} must be positive", "ZBetaModel")

    @property
    def dilative_params(self) -> tuple[float, float]:
        return 1.0 - self.beta / 2.0, -1.0 - self.beta

    def psi(self, q):
        return zbeta_psi(self.beta, self.C, q, self.spec)

    def describe(self):
        return {"variant": "zbeta", "beta": self.beta, "C": self.C}


@dataclass(frozen=True)
class EmpiricalCF:
    value: complex  # principal Log of the averaged characteristic function
    stderr: float
    n_samples: int
    cf: complex
    cf_stderr: float


class Estimate(NamedTuple):
    value: complex
    stderr: float


def _select_columns(ensemble, times):
    if times is None:
        return ensemble.values
    cols = []
    for t in times:
        hits = np.flatnonzero(np.isclose(ensemble.times, t, rtol=0, atol=1e-12))
        if hits.size == 0:
            raise DomainError(f"time {t} is not observed in the ensemble", "empirical_log_cf")
        cols.append(hits[0])
    return ensemble.values[:, cols]


def empirical_cf(values: np.ndarray, thetas: Sequence[float]) -> tuple[complex, float, bool]:
    """Sample mean of ``exp(i sum_j theta_j X_j)`` and its standard error.

    The third return value flags a degenerate sample (all phases equal), in
    which case the mean is returned exactly.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    phase = values @ np.asarray(thetas, dtype=float)
    n = phase.size
    if n == 0:
        raise InvalidParams("empty ensemble", "empirical_cf")
    if np.all(phase == phase[0]):
        return complex(np.exp(1j * phase[0])), 0.0, True
    z = np.exp(1j * phase)
    nu = complex(z.mean())
    sd = math.sqrt(float(np.mean(np.abs(z - nu) ** 2)))
    return nu, sd / math.sqrt(n), False


def empirical_log_cf(ensemble, thetas: Sequence[float], times: Sequence[float] | None = None) -> EmpiricalCF:
    """Principal logarithm of the averaged empirical CF, gated at ``|cf| >= 0.1``."""
    values = _select_columns(ensemble, times)
    nu, cf_se, degenerate = empirical_cf(values, thetas)
    n = values.shape[0]
    if degenerate:
        phase = float(np.atleast_2d(values)[0] @ np.asarray(thetas, dtype=float))
        wrapped = math.remainder(phase, 2 * math.pi)
        return EmpiricalCF(complex(0.0, wrapped), 0.0, n, nu, 0.0)
    mod = abs(nu)
    if mod < BRANCH_GATE:
        raise BranchUnsafe(
            f"|empirical CF| = {mod:.3g} < {BRANCH_GATE} at thetas={tuple(thetas)}; "
            "theta is too far out for this sample size",
            "empirical_log_cf",
        )
    value = complex(math.log(mod), math.atan2(nu.imag, nu.real))
    return EmpiricalCF(value, cf_se / mod, n, nu, cf_se)


def accumulation_functional(b_n: int, nu_hat: EmpiricalCF) -> Estimate:
    """``b_n (cf - 1)``: the compound-Poisson accumulation of a single-copy CF."""
    return Estimate(b_n * (nu_hat.cf - 1.0), b_n * nu_hat.cf_stderr)


@dataclass(frozen=True)
class EmpiricalModel(LogCFModel):
    ensemble: object = field(compare=False)

    @property
    def time_domain(self):
        return "real"

    def estimate(self, q: FinDimQuery) -> EmpiricalCF:
        return empirical_log_cf(self.ensemble, q.thetas, q.times)

    def psi(self, q):
        return self.estimate(q).value

    def describe(self):
        return {"variant": "empirical", "n_paths": int(self.ensemble.values.shape[0])}


def psi(model: LogCFModel, q: FinDimQuery) -> complex:
    """Log-characteristic function of ``(X_{t_1}, ..., X_{t_k})`` at ``theta``."""
    if not any(q.thetas):
        return 0j
    return model.psi(q)


def psi_rows(model: LogCFModel, queries: Sequence[FinDimQuery]):
    """CSV-ready rows ``(times, thetas, Re psi, Im psi, stderr)``."""
    rows = []
    for q in queries:
        if isinstance(model, EmpiricalModel):
            est = model.estimate(q)
            val, se = est.value, est.stderr
        else:
            val, se = psi(model, q), 0.0
        ts, ths = q.label()
        rows.append((ts, ths, val.real, val.imag, se))
    return rows
