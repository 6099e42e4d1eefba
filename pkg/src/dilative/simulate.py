"""Sample paths: semistable marginals by FFT inversion, two-sided Lévy drivers,
Riemann-sum GFLP paths and random-coefficient AR(1) panels.

All randomness comes from :class:`~dilative.rng.CounterRNG` streams keyed by
``(seed, purpose, path/series index, cell/time index)``, so batches can be
generated in any order and on any number of workers with identical output.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from .charfn import FinDimQuery
from .errors import DomainError, InvalidExponent, InvalidParams, SupportNotCovered
from .kernels import Kernel, StepDiscretized, l2_norm_sq
from .levy import (
    DiscreteMeasureExponent,
    GaussianRef,
    LevyExponent,
    SemistableLogPeriodic,
    normalize_query,
)
from .quadrature import QuadratureSpec, integrate
from .rng import CounterRNG

BATCH = 2048


@dataclass
class PathEnsemble:
    values: np.ndarray  # (n_paths, k)
    times: np.ndarray
    seed: int

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.times = np.asarray(self.times, dtype=float).ravel()
        if self.values.shape[1] != self.times.size:
            raise InvalidParams(
                f"values have {self.values.shape[1]} columns for {self.times.size} times", "PathEnsemble"
            )

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path_or_file, header_lines: Sequence[str] = ()):
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "path_id", *[f"t={t:.12g}" for t in self.times]])
            for i, row in enumerate(self.values):
                w.writerow([self.seed, i, *[repr(float(v)) for v in row]])
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path) -> "PathEnsemble":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        header, body = rows[0], rows[1:]
        times = [float(h.split("=", 1)[1]) for h in header[2:]]
        seed = int(body[0][0]) if body else 0
        values = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), len(times))
        return cls(values, times, seed)


# --------------------------------------------------------------------------
# FFT inversion of symmetric semistable marginals

FFT_HALF = 2**20
MASS_TOL = 1e-4
NEG_DENSITY_TOL = 1e-6
_ALIAS_TERMS = 64
_ALIAS_NODES = 257


def stable_tail_constant(gamma: float) -> float:
    """``lim x**gamma P(|X| > x)`` for the law with CF ``exp(-|theta|**gamma)``."""
    return 2.0 / math.pi * math.gamma(gamma) * math.sin(math.pi * gamma / 2.0)


def _levy_density_coeffs(exponent: SemistableLogPeriodic):
    # -|theta|**s  <->  k_s |x|**(-1-s) dx, continued to complex s = gamma + i omega
    g, eta, c = exponent.gamma, exponent.eta, exponent.c
    s = complex(g, 2.0 * math.pi * g / math.log(c))
    k = lambda z: special.gamma(1.0 + z) * np.sin(math.pi * z / 2.0) / math.pi
    return g, s, float(k(g).real), eta * complex(k(s))


def semistable_tail(exponent: SemistableLogPeriodic, t: float, x):
    """Leading-order ``P(|X_t| > x)`` for large ``x``: ``2t`` times the Lévy tail."""
    g, s, kg, ks = _levy_density_coeffs(exponent)
    x = np.asarray(x, dtype=float)
    return 2.0 * t * (kg * x ** (-g) / g + (ks * np.exp(-s * np.log(x)) / s).real)


def _tail_density(exponent, t, y):
    g, s, kg, ks = _levy_density_coeffs(exponent)
    return t * (kg * y ** (-1.0 - g) + (ks * np.exp(-(1.0 + s) * np.log(y))).real)


def _aliased_mass_density(exponent, t, x, window):
    """``sum_{m >= 1} d(2 m X + x) + d(2 m X - x)`` for the asymptotic tail density ``d``."""
    period = 2.0 * window
    m = np.arange(1, _ALIAS_TERMS + 1)[:, None]
    total = (_tail_density(exponent, t, m * period + x) + _tail_density(exponent, t, m * period - x)).sum(0)
    # remainder of the sum by its integral from M + 1/2
    edge = (_ALIAS_TERMS + 0.5) * period
    rest = (semistable_tail(exponent, t, edge + x) + semistable_tail(exponent, t, edge - x)) / (2.0 * period)
    return total + rest


@dataclass(frozen=True, eq=False)
class InvertedLaw:
    """Symmetric law tabulated on ``[0, window]`` with an asymptotic tail beyond.

    ``cdf[i] = F(i * dx)`` with ``F(0) = 1/2``. Beyond the window the tail
    ``P(|X| > x)`` follows the log-periodic Lévy-tail asymptotics, tabulated
    on a logarithmic grid and matched to the window mass.
    """

    dx: float
    cdf: np.ndarray
    tail_mass: float  # P(|X| > window)
    tail_logx: np.ndarray
    tail_logp: np.ndarray  # log P(|X| > x), decreasing
    gamma: float

    @property
    def window(self) -> float:
        return self.dx * (self.cdf.size - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.cdf.size) * self.dx

    def _tail_prob(self, a):
        la = np.log(np.maximum(a, self.window))
        lp = np.interp(la, self.tail_logx, self.tail_logp)
        beyond = la > self.tail_logx[-1]
        lp = np.where(beyond, self.tail_logp[-1] - self.gamma * (la - self.tail_logx[-1]), lp)
        return np.exp(lp)

    def cdf_at(self, v):
        v = np.asarray(v, dtype=float)
        a = np.abs(v)
        inner = np.interp(a / self.dx, np.arange(self.cdf.size), self.cdf)
        upper = np.where(a <= self.window, inner, 1.0 - 0.5 * self._tail_prob(a))
        return np.where(v >= 0, upper, 1.0 - upper)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        w = np.minimum(u, 1.0 - u)  # distance to the nearer end
        sign = np.where(u >= 0.5, 1.0, -1.0)
        in_tail = w < 0.5 * self.tail_mass
        lp = np.log(2.0 * np.where(in_tail, w, 0.5 * self.tail_mass))
        # log P is decreasing in log x: interpolate on the reversed table
        lx = np.interp(-lp, -self.tail_logp, self.tail_logx)
        beyond = lp < self.tail_logp[-1]
        lx = np.where(beyond, self.tail_logx[-1] + (self.tail_logp[-1] - lp) / self.gamma, lx)
        body = np.interp(1.0 - w, self.cdf, self.x)
        return sign * np.where(in_tail, np.exp(lx), body)


@lru_cache(maxsize=16)
def invert_semistable(exponent: SemistableLogPeriodic, t: float) -> InvertedLaw:
    """Density and CDF of the law with CF ``exp(t * phi)`` by a real FFT.

    The theta grid reaches past the point where ``|cf| < e**-40`` and is fine
    enough for ``dx <= scale / 100``. The FFT returns the periodized density,
    so the aliased tail mass is subtracted using the Lévy-tail asymptotics
    before the CDF is built. Raises InvalidExponent when the density dips
    below ``-1e-6`` or window mass plus tail mass misses 1 by more than ``1e-4``.
    """
    if not t > 0:
        raise DomainError(f"marginal time t={t} must be positive", "invert_semistable")
    g, eta = exponent.gamma, exponent.eta
    scale = t ** (1.0 / g)
    theta_max = max((40.0 / (t * (1.0 - eta))) ** (1.0 / g), 100.0 * math.pi / scale)
    M = FFT_HALF
    dtheta = theta_max / M
    window = math.pi / dtheta
    dx = window / M
    theta = np.arange(M + 1) * dtheta
    cf = np.exp(t * exponent(theta).real)
    density = (dtheta * M / math.pi) * np.fft.irfft(cf, n=2 * M)[: M + 1]
    nodes = np.linspace(0.0, window, _ALIAS_NODES)
    alias = _aliased_mass_density(exponent, t, nodes, window)
    density -= np.interp(np.arange(M + 1) * dx, nodes, alias)
    if density.min() < -NEG_DENSITY_TOL:
        raise InvalidExponent(
            f"inverted density reaches {density.min():.3e} < -{NEG_DENSITY_TOL}; "
            "exponent is not positive definite at these parameters",
            "invert_semistable",
        )
    density = np.maximum(density, 0.0)
    half = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * dx)])
    tail_mass = float(semistable_tail(exponent, t, window))
    window_mass = 2.0 * half[-1]
    if abs(window_mass + tail_mass - 1.0) > MASS_TOL or not 0.0 < tail_mass < 1.0:
        raise InvalidExponent(
            f"window mass {window_mass:.6f} plus tail mass {tail_mass:.3e} is off 1 by "
            f"{abs(window_mass + tail_mass - 1.0):.2e}",
            "invert_semistable",
        )
    # renormalize so the tabulated CDF meets the tail exactly
    cdf = 0.5 + half * (0.5 * (1.0 - tail_mass) / half[-1])
    cdf = np.maximum.accumulate(cdf)
    logx = math.log(window) + np.linspace(0.0, 45.0 / g, 2049)
    tail = semistable_tail(exponent, t, np.exp(logx)) * (tail_mass / semistable_tail(exponent, t, window))
    logp = np.minimum.accumulate(np.log(tail))
    return InvertedLaw(dx, cdf, tail_mass, logx, logp, g)


def sample_semistable_marginal(exponent: SemistableLogPeriodic, t: float, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws of ``X_t`` by inverse-CDF sampling of the inverted law."""
    law = invert_semistable(exponent, float(t))
    u = CounterRNG(seed, "marginal").uniform(np.arange(n), 0)
    return law.quantile(u)


# --------------------------------------------------------------------------
# Lévy drivers: increments over cells of given lengths

_SLOTS = 16


def poisson_quantile(u, mu):
    """Smallest ``k`` with ``P(N <= k) >= u`` for ``N ~ Poisson(mu)``.

    Same values as ``scipy.stats.poisson.ppf`` but much faster for large
    batches: a Cornish-Fisher start corrected by stepping with ``pdtr``.
    """
    u, mu = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(mu, dtype=float))
    z = special.ndtri(u)
    k = np.floor(mu + np.sqrt(mu) * z + (z * z - 1.0) / 6.0)
    k = np.clip(k, 0.0, None)
    k = np.where(mu > 0, k, 0.0)
    live = mu > 0
    # step up while the CDF is short of u, then down while the previous CDF already reaches u
    while True:
        up = live & (special.pdtr(k, mu) < u)
        if not up.any():
            break
        k = k + up
    while True:
        down = live & (k > 0) & (special.pdtr(k - 1.0, mu) >= u)
        if not down.any():
            break
        k = k - down
    return k


class IncrementSampler:
    exponent: LevyExponent

    def increments(self, lengths, rng: CounterRNG, paths, cells) -> np.ndarray:
        """Increments over cells ``cells`` (lengths ``lengths``) for each of ``paths``."""
        raise NotImplementedError


@dataclass(frozen=True)
class CompoundPoissonDriver(IncrementSampler):
    exponent: DiscreteMeasureExponent

    def increments(self, lengths, rng, paths, cells):
        lengths = np.asarray(lengths, dtype=float)
        m = self.exponent.measure
        out = np.zeros((len(paths), len(cells)))
        for a, (x, lam) in enumerate(m.atoms):
            u = rng.uniform(np.asarray(paths)[:, None], np.asarray(cells)[None, :] * _SLOTS + a)
            mu = lam * lengths[None, :]
            counts = poisson_quantile(u, mu)
            out += x * counts
            if self.exponent.compensation == "full":
                out -= x * mu
        return out


@dataclass(frozen=True)
class GaussianDriver(IncrementSampler):
    exponent: GaussianRef

    def increments(self, lengths, rng, paths, cells):
        z = rng.normal(np.asarray(paths)[:, None], np.asarray(cells)[None, :] * _SLOTS)
        return np.sqrt(self.exponent.sigma2 * np.asarray(lengths, dtype=float))[None, :] * z


@dataclass(frozen=True)
class SemistableDriver(IncrementSampler):
    exponent: SemistableLogPeriodic

    def increments(self, lengths, rng, paths, cells):
        lengths = np.asarray(lengths, dtype=float)
        u = rng.uniform(np.asarray(paths)[:, None], np.asarray(cells)[None, :] * _SLOTS)
        out = np.zeros_like(u)
        for h in np.unique(lengths):
            if h <= 0:
                continue
            cols = lengths == h
            out[:, cols] = invert_semistable(self.exponent, float(h)).quantile(u[:, cols])
        return out


def driver_for(exponent: LevyExponent) -> IncrementSampler:
    if isinstance(exponent, DiscreteMeasureExponent):
        return CompoundPoissonDriver(exponent)
    if isinstance(exponent, GaussianRef):
        return GaussianDriver(exponent)
    if isinstance(exponent, SemistableLogPeriodic):
        return SemistableDriver(exponent)
    raise InvalidParams(f"no increment sampler for {type(exponent).__name__}", "driver_for")


# --------------------------------------------------------------------------
# Two-sided grids and paths


@dataclass(frozen=True)
class TwoSidedGrid:
    points: np.ndarray = field(compare=False)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 3:
            raise InvalidParams("grid needs at least three points", "TwoSidedGrid")
        if not np.all(np.diff(p) > 0):
            raise InvalidParams("grid must be strictly increasing", "TwoSidedGrid")
        if not np.any(p == 0.0):
            raise InvalidParams("grid must contain 0", "TwoSidedGrid")
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, span: float, step: float) -> "TwoSidedGrid":
        n = int(round(span / step))
        return cls(np.arange(-n, n + 1) * step)

    @classmethod
    def graded(cls, inner: float, step: float, span: float, ratio: float = 1.05) -> "TwoSidedGrid":
        """Uniform ``step`` on ``[-inner, inner]``, then cells growing by ``ratio`` out to ``span``."""
        n = int(round(inner / step))
        right = list(np.arange(0, n + 1) * step)
        h = step
        while right[-1] < span:
            h *= ratio
            right.append(min(right[-1] + h, span) if right[-1] + h < span * 1.0001 else span)
        right = np.array(right)
        return cls(np.concatenate([-right[:0:-1], right]))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def cells(self):
        """``(left, right, midpoint, positive_side)`` arrays for all cells."""
        lo, hi = self.points[:-1], self.points[1:]
        return lo, hi, 0.5 * (lo + hi), lo >= 0.0

    def side_indices(self):
        """Cell index within its own side, counted outward from 0."""
        lo, hi, _, pos = self.cells()
        zero = int(np.flatnonzero(self.points == 0.0)[0])
        idx = np.arange(lo.size)
        return np.where(pos, idx - zero, zero - 1 - idx)


def _side_increments(sampler, grid, rng, paths):
    lo, hi, _, pos = grid.cells()
    side = grid.side_indices()
    lengths = hi - lo
    inc = np.empty((len(paths), lo.size))
    inc[:, pos] = sampler.increments(lengths[pos], rng.child("L1"), paths, side[pos])
    inc[:, ~pos] = sampler.increments(lengths[~pos], rng.child("L2"), paths, side[~pos])
    return inc


def sample_two_sided_path(sampler: IncrementSampler, grid: TwoSidedGrid, seed: int, n_paths: int = 1) -> np.ndarray:
    """Values of ``L`` at the grid points, ``(n_paths, len(grid.points))``.

    ``L_t = L1_t`` for ``t >= 0`` and ``L_t = -L2_{-t}`` for ``t < 0`` with an
    independent copy ``L2``; on a grid the left limit is the grid value.
    """
    rng = CounterRNG(seed, "two-sided")
    paths = np.arange(n_paths)
    inc = _side_increments(sampler, grid, rng, paths)
    _, _, _, pos = grid.cells()
    out = np.zeros((n_paths, grid.points.size))
    zero = int(np.flatnonzero(grid.points == 0.0)[0])
    out[:, zero + 1 :] = np.cumsum(inc[:, pos], axis=1)
    neg = inc[:, ~pos][:, ::-1]  # outward from 0
    out[:, :zero] = -np.cumsum(neg, axis=1)[:, ::-1]
    return out


def sample_one_sided_path(sampler: IncrementSampler, grid: TwoSidedGrid, seed: int, n_paths: int = 1) -> np.ndarray:
    """``L1`` alone on the nonnegative grid points; shares the stream of the two-sided path."""
    rng = CounterRNG(seed, "two-sided").child("L1")
    lo, hi, _, pos = grid.cells()
    side = grid.side_indices()
    inc = sampler.increments((hi - lo)[pos], rng, np.arange(n_paths), side[pos])
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)


# --------------------------------------------------------------------------
# GFLP Riemann sums


def _kernel_matrix(kernel: Kernel, times, mids):
    return np.stack([np.asarray(kernel(t, mids), dtype=float) for t in times], axis=1)


def support_fraction_outside(kernel: Kernel, t: float, span: tuple[float, float], spec: QuadratureSpec | None = None) -> float:
    """``int_{u outside span} f(t,u)^2 du / ||f(t, .)||^2``."""
    spec = spec or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-14)
    total = l2_norm_sq(kernel, t, spec)
    if total == 0.0:
        return 0.0
    lo, hi = span
    if isinstance(kernel, StepDiscretized):
        return _step_outside(kernel, t, lo, hi, spec) / total
    f2 = lambda u: np.asarray(kernel(t, u)) ** 2
    left = integrate(f2, -np.inf, lo, spec, log_tails=True).value
    right = integrate(f2, hi, np.inf, spec, log_tails=True).value
    return float((left + right) / total)


def _step_outside(kernel: StepDiscretized, t, lo, hi, spec, max_blocks: int = 64):
    # positive cells are [e, q e), negative ones (-q e, -e]; keep the parts beyond the span
    q = kernel.u_base
    total = 0.0
    for n, (length, values, reach) in enumerate(kernel.cells([t])):
        half = len(length) // 2
        edge = length[:half] / (q - 1.0)
        pos_out = np.clip(q * edge - np.maximum(edge, hi), 0.0, None)
        neg_out = np.clip(q * edge - np.maximum(edge, -lo), 0.0, None)
        terms = np.concatenate([pos_out, neg_out]) * values[:, 0] ** 2
        total += float(terms.sum())
        if edge[0] > max(hi, -lo) and reach > 1e3 and terms.max() < spec.tail_cutoff * max(total, 1.0):
            break
        if n >= max_blocks:
            break
    return total


def gflp_discretized_psi(kernel: Kernel, exponent: LevyExponent, grid: TwoSidedGrid, q: FinDimQuery) -> complex:
    """Exact log-CF of the Riemann sum ``sum_i f(t, m_i) dL_i`` used by :func:`sample_gflp`."""
    times, thetas = normalize_query(q.times, q.thetas)
    lo, hi, mid, _ = grid.cells()
    arg = _kernel_matrix(kernel, times, mid) @ thetas
    return complex(np.sum((hi - lo) * exponent(arg)))


def sample_gflp(
    kernel: Kernel,
    sampler: IncrementSampler,
    times: Sequence[float],
    grid: TwoSidedGrid,
    n_paths: int,
    seed: int,
    support_tol: float = 1e-4,
    threads: int = 1,
) -> PathEnsemble:
    """``X_t ~ sum_i f(t, m_i) dL_i`` over the grid cells (``m_i`` the cell midpoints)."""
    times = np.asarray(times, dtype=float)
    for t in times:
        kernel.check_time(t, "sample_gflp")
        frac = support_fraction_outside(kernel, float(t), grid.span)
        if frac > support_tol:
            raise SupportNotCovered(
                f"{frac:.2e} of ||f(t={t}, .)||^2 lies outside the grid span {grid.span}", "sample_gflp"
            )
    _, _, mid, _ = grid.cells()
    K = _kernel_matrix(kernel, times, mid)
    rng = CounterRNG(seed, "gflp")

    def batch(start):
        paths = np.arange(start, min(start + BATCH, n_paths))
        inc = _side_increments(sampler, grid, rng, paths)
        # explicit reduction: BLAS kernels may reorder sums between runs
        return np.stack([(inc * K[:, j]).sum(axis=1) for j in range(K.shape[1])], axis=1)

    starts = range(0, n_paths, BATCH)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(batch, starts))
    else:
        parts = [batch(s) for s in starts]
    values = np.concatenate(parts) if parts else np.zeros((0, times.size))
    return PathEnsemble(values, times, seed)


# --------------------------------------------------------------------------
# Lévy process at a finite set of times


@dataclass(frozen=True)
class LevyPathSampler:
    """Independent copies of a Lévy process observed at fixed times."""

    driver: IncrementSampler

    def sample(self, times, streams, rng: CounterRNG) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if np.any(times < 0):
            raise DomainError("Lévy process times must be nonnegative", "LevyPathSampler")
        order = np.argsort(times, kind="stable")
        st = times[order]
        dt = np.diff(st, prepend=0.0)
        out = np.zeros((len(streams), st.size))
        live = dt > 0
        if live.any():
            inc = np.zeros_like(out)
            inc[:, live] = self.driver.increments(dt[live], rng, np.asarray(streams), np.flatnonzero(live))
            out = np.cumsum(inc, axis=1)
        res = np.empty_like(out)
        res[:, order] = out
        return res


# --------------------------------------------------------------------------
# Random-coefficient AR(1) panels


@dataclass(frozen=True)
class RcAr1Spec:
    """Stationary AR(1) with a random coefficient ``a`` in [0, 1).

    ``mixing`` is ``"power"`` (density proportional to ``(1 - a)**beta``) or
    ``"point"`` (``a`` fixed at ``point``). Innovations are standard normal
    and the initial value is drawn from the stationary law given ``a``.
    """

    beta: float
    mixing: str = "power"
    point: float = 0.0
    innovation: str = "normal"
    init: str = "stationary"

    def __post_init__(self):
        if not -1.0 < self.beta < 1.0:
            raise InvalidParams(f"beta={self.beta} outside (-1, 1)", "RcAr1Spec")
        if self.mixing not in ("power", "point"):
            raise InvalidParams(f"unknown mixing density {self.mixing!r}", "RcAr1Spec")
        if self.mixing == "point" and not 0.0 <= self.point < 1.0:
            raise InvalidParams(f"point mass at {self.point} outside [0, 1)", "RcAr1Spec")
        if self.innovation != "normal" or self.init != "stationary":
            raise InvalidParams("only normal innovations with stationary start are supported", "RcAr1Spec")

    def mixing_pdf(self, a):
        a = np.asarray(a, dtype=float)
        return np.where((a >= 0) & (a < 1), (self.beta + 1.0) * (1.0 - a) ** self.beta, 0.0)

    def draw_coefficient(self, u):
        if self.mixing == "point":
            return np.full_like(np.asarray(u, dtype=float), self.point)
        # inverse of F(a) = 1 - (1 - a)**(beta + 1)
        return -np.expm1(np.log1p(-np.asarray(u)) / (self.beta + 1.0))


@dataclass(frozen=True)
class RcAr1Sampler:
    spec: RcAr1Spec

    def sample(self, times, streams, rng: CounterRNG) -> np.ndarray:
        """Partial sums ``Y_t = sum_{k=1}^{floor t} X(k)`` for each stream (one series per stream)."""
        times = np.asarray(times, dtype=float)
        if np.any(times < 0):
            raise DomainError("partial-sum times must be nonnegative", "sample_rc_ar1_partial_sums")
        streams = np.asarray(streams, dtype=np.uint64)
        steps = np.floor(times + 1e-9).astype(int)
        K = int(steps.max()) if steps.size else 0
        out = np.zeros((streams.size, times.size))
        if K == 0:
            return out
        a = self.spec.draw_coefficient(rng.uniform(streams, 0))
        x = rng.normal(streams, 1) / np.sqrt(1.0 - a * a)
        want = {s: np.flatnonzero(steps == s) for s in np.unique(steps) if s > 0}
        total = np.zeros(streams.size)
        eps = rng.normal(streams[:, None], 2 + np.arange(K, dtype=np.uint64)[None, :])
        for k in range(1, K + 1):
            x = a * x + eps[:, k - 1]
            total = total + x
            if k in want:
                out[:, want[k]] = total[:, None]
        return out


def rc_ar1_partial_sum_cov(a, steps) -> np.ndarray:
    """``Cov(S_p, S_q | a)`` for partial sums of the stationary AR(1), shape ``a.shape + (k, k)``.

    Uses ``Var S_p = (p + 2 sum_{h<p} (p - h) a**h) / (1 - a**2)`` built from
    cumulative sums of positive terms, and ``S_q - S_p ~ S_{q-p}``.
    """
    a = np.asarray(a, dtype=float)
    steps = np.asarray(steps, dtype=int)
    M = int(steps.max()) if steps.size else 0
    if M == 0:
        return np.zeros(a.shape + (steps.size, steps.size))
    powers = a[..., None] ** np.arange(1, M)  # a**h, h = 1..M-1
    partial = np.cumsum(powers, axis=-1)  # sum_{h<=k} a**h
    G = np.concatenate([np.zeros(a.shape + (1,)), np.cumsum(partial, axis=-1)], axis=-1)  # G[p-1]
    G = np.concatenate([np.zeros(a.shape + (1,)), G], axis=-1)  # index p, G[0] = 0
    p = np.arange(M + 1)
    var = (p + 2.0 * G) / (1.0 - a * a)[..., None]
    i, j = np.meshgrid(steps, steps, indexing="ij")
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    return 0.5 * (var[..., lo] + var[..., hi] - var[..., hi - lo])


def sample_rc_ar1_partial_sums(spec: RcAr1Spec, times, n_series: int, seed: int, threads: int = 1) -> PathEnsemble:
    rng = CounterRNG(seed, "rc-ar1")
    sampler = RcAr1Sampler(spec)

    def batch(start):
        return sampler.sample(times, np.arange(start, min(start + BATCH, n_series)), rng)

    starts = range(0, n_series, BATCH)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(batch, starts))
    else:
        parts = [batch(s) for s in starts]
    values = np.concatenate(parts) if parts else np.zeros((0, len(times)))
    return PathEnsemble(values, times, seed)


def sample_levy_paths(exponent: LevyExponent, times, n_paths: int, seed: int) -> PathEnsemble:
    rng = CounterRNG(seed, "levy")
    sampler = LevyPathSampler(driver_for(exponent))
    values = np.concatenate(
        [sampler.sample(times, np.arange(s, min(s + BATCH, n_paths)), rng) for s in range(0, n_paths, BATCH)]
    ) if n_paths else np.zeros((0, len(times)))
    return PathEnsemble(values, times, seed)
