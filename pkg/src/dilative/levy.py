"""Lévy exponents and finite-dimensional log-characteristic functions of Lévy processes.

Two different objects are both commonly written with the same Greek letter:
the Lévy *measure* (here :class:`DiscreteLevyMeasure`) and the Lévy *exponent*
``theta -> log E exp(i theta L_1)`` (here the :class:`LevyExponent` family).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InvalidParams, NegativeTime

ETA_MAX = 0.1


def semistable_exponent(gamma: float, c: float, eta: float, theta):
    """Symmetric log-periodic exponent ``-|theta|^gamma (1 + eta cos(2 pi gamma ln|theta| / ln c))``.

    It satisfies ``phi(c**(1/gamma) * theta) == c * phi(theta)`` exactly, and
    reduces to the symmetric stable exponent when ``eta == 0``.
    """
    _check_semistable(gamma, c, eta)
    th = np.abs(np.asarray(theta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        wave = 1.0 + eta * np.cos(2.0 * math.pi * gamma * np.log(th) / math.log(c))
        out = np.where(th > 0.0, -(th**gamma) * wave, 0.0)
    if out.ndim == 0:
        return complex(out)
    return out.astype(complex)


def _check_semistable(gamma, c, eta, eta_max=ETA_MAX):
    if not 0.0 < gamma < 2.0:
        raise InvalidParams(f"gamma={gamma} outside (0, 2)", "semistable_exponent")
    if not c > 1.0:
        raise InvalidParams(f"c={c} must exceed 1", "semistable_exponent")
    if not 0.0 <= eta <= eta_max:
        raise InvalidParams(f"eta={eta} outside [0, {eta_max}]", "semistable_exponent")


@dataclass(frozen=True)
class DiscreteLevyMeasure:
    """Finitely many atoms ``(position, mass)`` with nonzero positions."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        if not atoms:
            raise InvalidParams("a Lévy measure needs at least one atom", "DiscreteLevyMeasure")
        for x, m in atoms:
            if x == 0.0 or not math.isfinite(x):
                raise InvalidParams(f"atom position {x} must be finite and nonzero", "DiscreteLevyMeasure")
            if not (m > 0.0 and math.isfinite(m)):
                raise InvalidParams(f"atom mass {m} must be positive", "DiscreteLevyMeasure")
        assert math.isfinite(sum(m * x * x for x, m in atoms))
        object.__setattr__(self, "atoms", atoms)

    @property
    def positions(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms])

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def second_moment(self) -> float:
        return float(np.sum(self.masses * self.positions**2))

    @classmethod
    def symmetric(cls, x: float = 1.0, mass: float = 1.0) -> "DiscreteLevyMeasure":
        return cls(((x, mass), (-x, mass)))


def discrete_exponent(measure: DiscreteLevyMeasure, theta, compensated: bool = True):
    """``sum_atoms mass * (exp(i theta x) - 1 - i theta x)``; drop the linear term if not compensated."""
    th = np.asarray(theta, dtype=float)
    x = measure.positions
    m = measure.masses
    arg = np.multiply.outer(th, x)
    # cos(a) - 1 written as -2 sin^2(a/2) to avoid cancellation at small a
    re = -2.0 * np.sin(0.5 * arg) ** 2
    im = np.sin(arg)
    if compensated:
        im = im - arg
    out = (re + 1j * im) @ m
    if out.ndim == 0:
        return complex(out)
    return out


class LevyExponent:
    """Evaluable exponent of an infinitely divisible law on the real line."""

    def __call__(self, theta):
        raise NotImplementedError

    def scaled(self, factor: float) -> "LevyExponent":
        """The exponent ``factor * phi`` (a convolution power of the law)."""
        return ScaledExponent(self, factor)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SemistableLogPeriodic(LevyExponent):
    gamma: float
    c: float
    eta: float = 0.0
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        _check_semistable(self.gamma, self.c, self.eta)
        if self.validate and self.eta > 0.0:
            _density_gate(self.gamma, self.c, self.eta)

    def __call__(self, theta):
        return semistable_exponent(self.gamma, self.c, self.eta, theta)

    @property
    def hurst(self) -> float:
        return 1.0 / self.gamma

    def describe(self):
        return {"type": "semistable", "gamma": self.gamma, "c": self.c, "eta": self.eta}


@lru_cache(maxsize=256)
def _density_gate(gamma, c, eta):
    # deferred: the FFT inverter lives with the samplers
    from .simulate import invert_semistable

    invert_semistable(SemistableLogPeriodic(gamma, c, eta, validate=False), 1.0)


@dataclass(frozen=True)
class DiscreteMeasureExponent(LevyExponent):
    measure: DiscreteLevyMeasure
    compensation: str = "full"

    def __post_init__(self):
        if self.compensation not in ("full", "none"):
            raise InvalidParams(f"compensation must be 'full' or 'none', got {self.compensation!r}")

    def __call__(self, theta):
        return discrete_exponent(self.measure, theta, self.compensation == "full")

    def describe(self):
        return {
            "type": "discrete",
            "atoms": [list(a) for a in self.measure.atoms],
            "compensation": self.compensation,
        }


@dataclass(frozen=True)
class GaussianRef(LevyExponent):
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.sigma2 >= 0.0:
            raise InvalidParams(f"sigma2={self.sigma2} must be nonnegative", "GaussianRef")

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        out = -0.5 * self.sigma2 * th * th + 0j
        return complex(out) if out.ndim == 0 else out

    def describe(self):
        return {"type": "gaussian", "sigma2": self.sigma2}


@dataclass(frozen=True)
class ScaledExponent(LevyExponent):
    base: LevyExponent
    factor: float

    def __post_init__(self):
        if not self.factor > 0.0:
            raise InvalidParams("convolution power must be positive", "ScaledExponent")

    def __call__(self, theta):
        return self.factor * self.base(theta)

    def describe(self):
        return {"type": "scaled", "factor": self.factor, "base": self.base.describe()}


def normalize_query(times: Sequence[float], thetas: Sequence[float]):
    """Sort times ascending, permute thetas alongside and merge exact ties by summing."""
    t = np.asarray(times, dtype=float).ravel()
    th = np.asarray(thetas, dtype=float).ravel()
    if t.shape != th.shape:
        raise InvalidParams("times and thetas must have equal length")
    if t.size == 0:
        raise InvalidParams("a query needs at least one time point")
    order = np.argsort(t, kind="stable")
    t, th = t[order], th[order]
    uniq, inverse = np.unique(t, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inverse, th)
    return uniq, merged


def levy_findim_psi(exponent: LevyExponent, times: Sequence[float], thetas: Sequence[float]) -> complex:
    """``sum_j (t_j - t_{j-1}) phi(theta_j + ... + theta_k)`` with ``t_0 = 0``."""
    t, th = normalize_query(times, thetas)
    if t[0] < 0.0:
        raise NegativeTime(f"Lévy process time {t[0]} is negative", "levy_findim_psi")
    if not np.any(th):
        return 0j
    # coordinates with theta = 0 do not change psi; dropping them keeps that exact
    keep = th != 0.0
    t, th = t[keep], th[keep]
    dt = np.diff(t, prepend=0.0)
    tails = np.cumsum(th[::-1])[::-1]
    vals = np.asarray(exponent(tails), dtype=complex)
    # zero-length increments contribute nothing even where phi is singular-free
    return complex(np.sum(np.where(dt > 0.0, dt * vals, 0.0)))
