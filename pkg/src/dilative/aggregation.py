"""Aggregation schemes and their Monte Carlo and exact diagnostics.

An expand scheme (``delta <= 0``) forms ``a_n sum_{i <= b_n} Y^(i)_{n t}`` and a
shrink scheme (``delta >= 0``) forms ``a_n**-1 sum_{i <= b_n} Y^(i)_{t / n}``
from i.i.d. copies ``Y^(i)``. The canonical choice is ``a_n = n**(delta/2 - alpha)``
and ``b_n = floor(n**|delta|)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .charfn import FinDimQuery, LevyModel, LogCFModel, ZBetaModel, accumulation_functional, empirical_cf, psi
from .errors import BudgetExceeded, DomainError, InvalidParams, PrereqFailed
from .scaling import LEVY_TOL, DilativeParams, dilative_residual
from .simulate import LevyPathSampler, PathEnsemble, RcAr1Sampler, RcAr1Spec, driver_for, rc_ar1_partial_sum_cov
from .rng import CounterRNG

DEFAULT_BUDGET = 10**7
_SERIES_PER_BATCH = 1 << 15
_MAX_EXACT_FLOAT = 2.0**53


def canonical_sequences(alpha: float, delta: float) -> tuple[Callable[[int], float], Callable[[int], int]]:
    """``a_n = n**(delta/2 - alpha)`` and ``b_n = floor(n**|delta|)``."""
    e = delta / 2.0 - alpha
    d = abs(delta)
    return (lambda n: float(n) ** e), (lambda n: _floor_power(n, d))


def _floor_power(n, d):
    v = float(n) ** d
    r = round(v)
    # integer powers such as 10**1.0 should not fall a hair short of r
    return int(r) if abs(v - r) <= 1e-9 * max(1.0, v) else int(math.floor(v))


def geometric_subsequence(c: float, n: int) -> int:
    """``floor(c**n)``; refuses ``n`` for which ``c**n`` is past exact float range."""
    if not c > 1:
        raise InvalidParams(f"c={c} must exceed 1", "geometric_subsequence")
    if n < 1:
        raise InvalidParams(f"n={n} must be >= 1", "geometric_subsequence")
    cap = int(math.floor(math.log(_MAX_EXACT_FLOAT) / math.log(c)))
    if n > cap:
        raise InvalidParams(f"c**n overflows exact integers for n > {cap}", "geometric_subsequence")
    return _floor_power(c, n)


@dataclass(frozen=True)
class AggregationScheme:
    alpha: float
    delta: float
    direction: str
    a: Callable[[int], float] = field(compare=False)
    b: Callable[[int], int] = field(compare=False)
    subsequence: tuple[float, Callable[[int], int]] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.direction not in ("expand", "shrink"):
            raise InvalidParams(f"direction must be 'expand' or 'shrink', got {self.direction!r}", "AggregationScheme")
        if self.direction == "expand" and self.delta > 0:
            raise InvalidParams("expand schemes need delta <= 0", "AggregationScheme")
        if self.direction == "shrink" and self.delta < 0:
            raise InvalidParams("shrink schemes need delta >= 0", "AggregationScheme")

    @classmethod
    def canonical(cls, alpha: float, delta: float, direction: str | None = None, mc: bool = False, c: float | None = None):
        """Canonical sequences; with ``mc=True`` and ``delta == 0`` the count is ``floor(ln n) + 1``."""
        if direction is None:
            direction = "shrink" if delta > 0 else "expand"
        a, b = canonical_sequences(alpha, delta)
        if mc and delta == 0:
            b = lambda n: int(math.floor(math.log(n))) + 1
        sub = None if c is None else (c, lambda n, c=c: geometric_subsequence(c, n))
        return cls(alpha, delta, direction, a, b, sub)

    def scaled_times(self, n: int, times) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        return n * t if self.direction == "expand" else t / n

    def value_scale(self, n: int) -> float:
        return self.a(n) if self.direction == "expand" else 1.0 / self.a(n)

    def ladder(self, stages: Sequence[int]) -> list[int]:
        """Indices along ``k(m)`` when a geometric subsequence is set, else the stages themselves."""
        if self.subsequence is None:
            return [int(n) for n in stages]
        return [self.subsequence[1](m) for m in stages]


def as_sampler(source):
    """Y sampler for a Lévy model, an exponent with a driver, or an AR(1) spec."""
    if isinstance(source, LevyModel):
        return LevyPathSampler(driver_for(source.exponent))
    if isinstance(source, RcAr1Spec):
        return RcAr1Sampler(source)
    if hasattr(source, "sample"):
        return source
    raise InvalidParams(f"cannot sample copies of {type(source).__name__}", "as_sampler")


def _check_budget(b_n, n_mc, budget, n):
    if b_n * n_mc > budget:
        raise BudgetExceeded(
            f"stage n={n} needs b_n * n_mc = {b_n} * {n_mc} = {b_n * n_mc} series > budget {budget}",
            "aggregate_sample",
        )


def rescaled_copies(sampler, n, scheme, times, n_copies, seed, threads=1) -> np.ndarray:
    """``a_n Y^(i)_{n t}`` (or the shrink analogue) for copies ``i < n_copies``, one row each."""
    sampler = as_sampler(sampler)
    st = scheme.scaled_times(n, times)
    if np.any(st < 0):
        raise DomainError("scaled times must be nonnegative", "aggregate_sample")
    rng = CounterRNG(seed, f"aggregate/n={n}")
    scale = scheme.value_scale(n)

    def batch(start):
        streams = np.arange(start, min(start + _SERIES_PER_BATCH, n_copies), dtype=np.uint64)
        return scale * sampler.sample(st, streams, rng)

    starts = range(0, n_copies, _SERIES_PER_BATCH)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(batch, starts))
    else:
        parts = [batch(s) for s in starts]
    return np.concatenate(parts) if parts else np.zeros((0, len(times)))


def aggregate_sample(sampler, n, scheme, times, n_mc, seed, budget=DEFAULT_BUDGET, threads=1) -> PathEnsemble:
    """``n_mc`` realizations of the rescaled aggregate; realization ``r`` uses copies ``r b_n .. (r+1) b_n - 1``."""
    b_n = int(scheme.b(n))
    _check_budget(b_n, n_mc, budget, n)
    copies = rescaled_copies(sampler, n, scheme, times, b_n * n_mc, seed, threads)
    values = copies.reshape(n_mc, b_n, len(times)).sum(axis=1)
    return PathEnsemble(values, times, seed)


class ConvergenceRow(NamedTuple):
    n: int
    query: FinDimQuery
    value: complex
    target: complex
    residual: float
    stderr: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    calibrated_C: float | None = None

    def stage_residuals(self) -> dict[int, float]:
        """Mean residual per ladder stage."""
        out: dict[int, list[float]] = {}
        for r in self.rows:
            out.setdefault(r.n, []).append(r.residual)
        return {n: float(np.mean(v)) for n, v in out.items()}

    @property
    def kendall_tau(self) -> float:
        """Kendall tau of the per-stage mean residual against ``n`` (negative: decreasing)."""
        s = self.stage_residuals()
        if len(s) < 2:
            return float("nan")
        ns = sorted(s)
        return float(stats.kendalltau(ns, [s[n] for n in ns]).statistic)

    def within(self, k_sigma: float = 3.0) -> bool:
        return all(r.residual <= k_sigma * r.stderr for r in self.rows)


def accumulation_estimates(sampler, scheme, n_ladder, queries, n_mc, seed, budget=DEFAULT_BUDGET, threads=1):
    """``{(n, query): Estimate}`` of ``b_n (cf - 1)`` using all ``b_n * n_mc`` rescaled copies."""
    out = {}
    times = sorted({t for q in queries for t in q.times})
    col = {t: i for i, t in enumerate(times)}
    for n in n_ladder:
        b_n = int(scheme.b(n))
        _check_budget(b_n, n_mc, budget, n)
        copies = rescaled_copies(sampler, n, scheme, times, b_n * n_mc, seed, threads)
        for q in queries:
            vals = copies[:, [col[t] for t in q.times]]
            nu, se, _ = empirical_cf(vals, q.thetas)
            est = accumulation_functional(b_n, _CF(nu, se))
            out[(n, q)] = est
    return out


def conditional_accumulation_estimates(spec: RcAr1Spec, scheme, n_ladder, queries, n_mc, seed, budget=DEFAULT_BUDGET):
    """Variance-reduced ``b_n (cf - 1)`` for random-coefficient AR(1) copies.

    Given ``a`` a copy is exactly Gaussian, so its CF is averaged in closed
    form instead of being simulated, and the ``b_n * n_mc`` coefficients are
    drawn from stratified uniforms ``(i + V_i) / N``. The standard error comes
    from differences within adjacent pairs of strata.
    """
    if not isinstance(spec, RcAr1Spec):
        raise InvalidParams("the conditional estimator needs an RcAr1Spec", "conditional_accumulation_estimates")
    out = {}
    times = sorted({t for q in queries for t in q.times})
    col = {t: i for i, t in enumerate(times)}
    for n in n_ladder:
        b_n = int(scheme.b(n))
        _check_budget(b_n, n_mc, budget, n)
        N = b_n * n_mc
        rng = CounterRNG(seed, f"aggregate-conditional/n={n}")
        idx = np.arange(N)
        u = (idx + rng.uniform(idx, 0)) / N
        a = spec.draw_coefficient(u)
        steps = np.floor(scheme.scaled_times(n, times) + 1e-9).astype(int)
        scale2 = scheme.value_scale(n) ** 2
        sums = {q: np.zeros(N) for q in queries}
        for start in range(0, N, _SERIES_PER_BATCH):
            sl = slice(start, min(start + _SERIES_PER_BATCH, N))
            cov = rc_ar1_partial_sum_cov(a[sl], steps)
            for q in queries:
                c = [col[t] for t in q.times]
                th = np.asarray(q.thetas)
                v = np.einsum("i,...ij,j->...", th, cov[:, c][:, :, c], th)
                sums[q][sl] = np.expm1(-0.5 * scale2 * v)
        for q in queries:
            g = sums[q]
            pairs = g[: N - N % 2].reshape(-1, 2)
            var = np.sum((pairs[:, 0] - pairs[:, 1]) ** 2) / N**2
            out[(n, q)] = _Estimate(complex(b_n * g.mean()), float(b_n * math.sqrt(var)))
    return out


class _Estimate(NamedTuple):
    value: complex
    stderr: float


class _CF(NamedTuple):
    cf: complex
    cf_stderr: float


def convergence_report(
    sampler,
    target: LogCFModel,
    scheme: AggregationScheme,
    n_ladder: Sequence[int],
    queries: Sequence[FinDimQuery],
    n_mc: int,
    seed: int,
    calibration: FinDimQuery | None = None,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
    estimator: str = "sample",
) -> ConvergenceTable:
    """Tabulate ``b_n (cf_n - 1)`` against ``psi`` of the target along the ladder.

    With ``calibration`` set, the target must be a :class:`ZBetaModel`; its
    constant ``C`` is fitted so that it matches the largest stage at that one
    query, and the calibration query is left out of the table.

    ``estimator="conditional"`` (AR(1) panels only) swaps simulated copies
    for :func:`conditional_accumulation_estimates`.
    """
    n_ladder = [int(n) for n in n_ladder]
    if not n_ladder:
        return ConvergenceTable(())
    queries = list(queries)
    all_queries = queries + ([calibration] if calibration is not None and calibration not in queries else [])
    if estimator == "sample":
        est = accumulation_estimates(sampler, scheme, n_ladder, all_queries, n_mc, seed, budget, threads)
    elif estimator == "conditional":
        est = conditional_accumulation_estimates(sampler, scheme, n_ladder, all_queries, n_mc, seed, budget)
    else:
        raise InvalidParams(f"unknown estimator {estimator!r}", "convergence_report")
    C = None
    if calibration is not None:
        if not isinstance(target, ZBetaModel):
            raise InvalidParams("one-point calibration needs a ZBetaModel target", "convergence_report")
        unit = psi(ZBetaModel(target.beta, 1.0, target.spec), calibration).real
        C = float(est[(max(n_ladder), calibration)].value.real / unit)
        if not C > 0:
            raise PrereqFailed(f"calibrated C={C:.3g} is not positive", "convergence_report")
        target = ZBetaModel(target.beta, C, target.spec)
        queries = [q for q in queries if q != calibration]
    targets = {q: psi(target, q) for q in queries}
    rows = []
    for n in sorted(n_ladder):
        for q in queries:
            e = est[(n, q)]
            rows.append(ConvergenceRow(n, q, complex(e.value), targets[q], abs(e.value - targets[q]), e.stderr))
    return ConvergenceTable(tuple(rows), C)


class IdentityPoint(NamedTuple):
    query: FinDimQuery
    residual: float
    predicted: float


def self_aggregation_residuals(
    model: LogCFModel,
    p: DilativeParams,
    n: int,
    queries: Sequence[FinDimQuery],
    member_tol: float = LEVY_TOL,
    relative: bool = False,
) -> list[IdentityPoint]:
    """Residuals of the exact identity behind the i.i.d.-copies limit theorem.

    For ``delta <= 0``: ``|floor(n**-delta) psi_{n t}(n**(delta/2 - alpha) theta) - psi_t(theta)|``;
    for ``delta > 0`` the mirror with ``t / n`` and ``n**(alpha - delta/2)``.
    Membership of ``n`` (resp. ``1/n``) is checked first; then each residual
    equals ``|floor(n**|delta|) n**-|delta| - 1| |psi_t(theta)|``, returned as ``predicted``.
    """
    if n < 1:
        raise InvalidParams(f"n={n} must be >= 1", "self_aggregation_identity")
    expand = p.delta <= 0
    T = float(n) if expand else 1.0 / n
    report = dilative_residual(model, T, p, queries, member_tol, relative)
    if not report.verdict:
        w = report.witness
        raise PrereqFailed(
            f"T={T:.6g} is not in the decomposability group at tol {member_tol:.1e}: residual "
            f"{report.sup_residual:.3e} at times={w.query.times}, thetas={w.query.thetas}",
            "self_aggregation_identity",
        )
    b_n = _floor_power(n, abs(p.delta))
    prefactor = b_n * float(n) ** (-abs(p.delta))
    out = []
    for q in queries:
        base = psi(model, q)
        if expand:
            lhs = b_n * psi(model, q.dilated(n, float(n) ** (p.delta / 2.0 - p.alpha)))
        else:
            lhs = b_n * psi(model, q.dilated(1.0 / n, float(n) ** (p.alpha - p.delta / 2.0)))
        out.append(IdentityPoint(q, abs(lhs - base), abs(prefactor - 1.0) * abs(base)))
    return out


def self_aggregation_identity(model, p, n, queries, member_tol=LEVY_TOL, relative=False) -> float:
    """Sup residual of :func:`self_aggregation_residuals`, checked against its exact prediction."""
    pts = self_aggregation_residuals(model, p, n, queries, member_tol, relative)
    worst = max(pt.residual for pt in pts)
    bound = max(pt.predicted for pt in pts) + member_tol * (1.0 + max(abs(psi(model, q)) for q in queries))
    if worst > bound * (1.0 + 1e-12):
        raise PrereqFailed(
            f"identity residual {worst:.3e} exceeds the algebraic bound {bound:.3e}", "self_aggregation_identity"
        )
    return worst


@dataclass(frozen=True)
class RegVarResult:
    max_deviation: float  # at the largest n
    per_n: tuple[tuple[int, float], ...]


def regvar_ratio_check(seq, gamma_index: float, lambdas: Sequence[float], n_ladder: Sequence[int]) -> RegVarResult:
    """``max_lambda |seq(floor(lambda n)) / seq(n) - lambda**gamma|`` along the ladder."""
    ladder = [int(n) for n in n_ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidParams("n_ladder must be increasing", "regvar_ratio_check")
    if any(not lam > 0 for lam in lambdas):
        raise InvalidParams("lambdas must be positive", "regvar_ratio_check")
    per_n = []
    for n in ladder:
        dev = max(abs(seq(int(math.floor(lam * n))) / seq(n) - lam**gamma_index) for lam in lambdas)
        per_n.append((n, float(dev)))
    return RegVarResult(per_n[-1][1] if per_n else 0.0, tuple(per_n))
