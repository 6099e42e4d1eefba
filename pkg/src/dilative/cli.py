"""Command line runner: ``dilative <command> --config FILE [--seed N] [--out PATH] [--tol X] [--threads N]``.

Exit codes: 0 success, 1 a verdict failed, 2 configuration error, 3 numerical error.
Errors are written to stderr as one JSON record.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
from dataclasses import dataclass
from importlib import metadata

import numpy as np
import scipy

from .aggregation import AggregationScheme, convergence_report
from .charfn import ZBetaModel, psi
from .config import (
    ExperimentConfig,
    build_exponent,
    build_kernel,
    build_model,
    load_config,
    quad_spec,
    resolve_alpha,
)
from .errors import ConfigInvalid, DilativeError
from .scaling import DilativeParams, dilative_residual
from .simulate import (
    RcAr1Spec,
    TwoSidedGrid,
    driver_for,
    sample_gflp,
    sample_levy_paths,
    sample_rc_ar1_partial_sums,
)

COMMANDS = ("verify-scaling", "simulate", "aggregate", "eval-psi")
REPORT_COLUMNS = (
    "command", "model", "index", "times", "thetas",
    "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "stderr", "verdict",
)


@dataclass(frozen=True)
class ReportRow:
    command: str
    model: str
    index: str
    times: str
    thetas: str
    lhs: complex | None
    rhs: complex | None
    residual: float | None
    stderr: float | None
    verdict: str

    def cells(self) -> list[str]:
        def num(x):
            return "" if x is None else repr(float(x))

        def parts(z):
            return ("", "") if z is None else (num(z.real), num(z.imag))

        return [
            self.command, self.model, self.index, self.times, self.thetas,
            *parts(self.lhs), *parts(self.rhs), num(self.residual), num(self.stderr), self.verdict,
        ]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def provenance(cfg: ExperimentConfig) -> list[str]:
    return [
        f"config_sha256={cfg.digest()}",
        f"seed={cfg.seed}",
        f"command={cfg.command}",
        f"artifact={_version()} numpy={np.__version__} scipy={scipy.__version__} python={platform.python_version()}",
    ]


def _model_id(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def _fmt(t) -> str:
    return repr(float(t))


def run_verify(cfg: ExperimentConfig, threads: int):
    model = build_model(cfg)
    delta = cfg.params.delta
    p = DilativeParams(resolve_alpha(cfg, cfg.params.alpha, delta), delta, cfg.params.c)
    grid = cfg.grid.build()
    mid = _model_id(cfg)
    rows, ok = [], True
    for T in cfg.params.T:
        rep = dilative_residual(model, T, p, grid, cfg.tolerance.member, cfg.tolerance.relative)
        ok &= rep.verdict
        for pt in rep.per_point:
            ts, ths = pt.query.label()
            passed = pt.residual <= max(rep.tolerance, 3.0 * pt.stderr)
            rows.append(ReportRow(cfg.command, mid, _fmt(T), ts, ths, pt.lhs, pt.rhs, pt.residual, pt.stderr,
                                  "pass" if passed else "fail"))
    return rows, 0 if ok else 1


def run_eval(cfg: ExperimentConfig, threads: int):
    model = build_model(cfg)
    mid = _model_id(cfg)
    rows = []
    for i, q in enumerate(cfg.grid.build()):
        ts, ths = q.label()
        rows.append(ReportRow(cfg.command, mid, str(i), ts, ths, psi(model, q), None, None, 0.0, "ok"))
    return rows, 0


def run_aggregate(cfg: ExperimentConfig, threads: int):
    sch = cfg.scheme
    alpha = resolve_alpha(cfg, sch.alpha, sch.delta)
    scheme = AggregationScheme.canonical(alpha, sch.delta, sch.direction)
    m = cfg.model
    if m.variant == "rc_ar1":
        # the panel's analytic limit is Z_beta; C is fitted when a calibration query is given
        source = RcAr1Spec(m.beta, m.mixing, m.point)
        target = ZBetaModel(m.beta, 1.0 + m.beta, quad_spec(cfg))
    else:
        source = build_model(cfg)
        target = source
    queries = cfg.grid.build()
    calibration = sch.calibration.query() if sch.calibration else None
    table = convergence_report(
        source, target, scheme, sch.n_ladder, queries, cfg.n_mc, cfg.seed,
        calibration=calibration, budget=sch.budget, threads=threads, estimator=sch.estimator,
    )
    mid = _model_id(cfg)
    rows, ok = [], True
    for r in table.rows:
        ts, ths = r.query.label()
        if sch.check == "within":
            passed = r.residual <= 3.0 * r.stderr
            ok &= passed
            verdict = "pass" if passed else "fail"
        else:
            verdict = "n/a"
        rows.append(ReportRow(cfg.command, mid, str(r.n), ts, ths, r.value, r.target, r.residual, r.stderr, verdict))
    if sch.check == "trend" and table.rows:
        tau = table.kendall_tau
        passed = tau < 0
        ok &= passed
        extra = "" if table.calibrated_C is None else f"C={table.calibrated_C!r}"
        rows.append(ReportRow(cfg.command, mid, "kendall_tau", "", extra, complex(tau, 0.0), None, None, None,
                              "pass" if passed else "fail"))
    return rows, 0 if ok else 1


def run_simulate(cfg: ExperimentConfig, threads: int):
    sim = cfg.simulate
    m = cfg.model
    if m.variant == "levy":
        return sample_levy_paths(build_exponent(m.exponent), sim.times, sim.n_paths, cfg.seed), 0
    if m.variant == "gflp":
        g = sim.grid
        grid = TwoSidedGrid.graded(g.inner, g.step, g.span, g.ratio)
        ens = sample_gflp(build_kernel(m.kernel), driver_for(build_exponent(m.exponent)), sim.times, grid,
                          sim.n_paths, cfg.seed, threads=threads)
        return ens, 0
    if m.variant == "rc_ar1":
        spec = RcAr1Spec(m.beta, m.mixing, m.point)
        return sample_rc_ar1_partial_sums(spec, sim.times, sim.n_paths, cfg.seed, threads=threads), 0
    raise ConfigInvalid("model.variant: zbeta has no path sampler", "run_simulate")


RUNNERS = {"verify-scaling": run_verify, "eval-psi": run_eval, "aggregate": run_aggregate}


def render(cfg: ExperimentConfig, threads: int = 1) -> tuple[str, int]:
    """Run the configured command and return the CSV text and exit status."""
    buf = io.StringIO()
    if cfg.command == "simulate":
        ens, status = run_simulate(cfg, threads)
        ens.to_csv(buf, provenance(cfg))
        return buf.getvalue(), status
    rows, status = RUNNERS[cfg.command](cfg, threads)
    for line in provenance(cfg):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue(), status


def run(cfg: ExperimentConfig, out: str | None = None, threads: int = 1) -> int:
    text, status = render(cfg, threads)
    target = out or cfg.output
    if target is None or target == "-":
        sys.stdout.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dilative", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML experiment file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="report path ('-' for stdout); overrides the config")
    ap.add_argument("--tol", type=float, help="override tolerance.member")
    ap.add_argument("--threads", type=int, default=1, help="worker threads; output does not depend on it")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"command": args.command}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.tol is not None:
            overrides["tolerance.member"] = args.tol
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1", "main")
        cfg = load_config(args.config, overrides)
        return run(cfg, args.out, args.threads)
    except DilativeError as exc:
        sys.stderr.write(json.dumps(exc.record(), sort_keys=True) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
