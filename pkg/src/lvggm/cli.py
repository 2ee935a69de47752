"""Command-line frontend: data ingestion, estimator dispatch, grid sweeps
with parallel execution, and machine-readable reports.

Exit codes: 0 on a converged fit, 2 on a completed-but-not-converged fit,
1 on any error. Sweep cells are embarrassingly parallel and are always
assembled in grid order, so output bytes do not depend on the parallelism
width (wall-clock timing is therefore kept out of sweep documents).
"""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import click
import numpy as np

from . import io as lvio
from .composite import composite_norm, fit_via_composite
from .diagnostics import gamma_stability, kkt_report, recovery_metrics
from .estimators import (
    fit_dantzig,
    fit_em_rank,
    fit_two_step_threshold,
    numeric_rank,
    threshold_defaults,
)
from .gaussian import gaussian_log_likelihood, objective_value, sample_covariance
from .solver import fit_mle
from .synth import SyntheticModel, draw_samples, generate_latent_model, save_model
from .types import (
    FitReport,
    PrecisionDecomposition,
    RegularizationParams,
    SampleCovariance,
    SolverOptions,
    ThresholdParams,
)

ESTIMATORS = ("mle", "em", "threshold", "dantzig", "composite")
SWEEP_ESTIMATORS = ("mle", "composite", "dantzig")


def parse_grid(spec):
    """Parse a grid flag: single value, comma list, or log-spaced lo:hi:count."""
    spec = str(spec).strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec must be lo:hi:count, got {spec!r}")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if lo <= 0 or hi <= 0 or count < 1:
            raise ValueError(f"log-spaced grid needs positive bounds, got {spec!r}")
        return [float(x) for x in np.logspace(math.log10(lo), math.log10(hi), count)]
    return [float(x) for x in spec.split(",") if x.strip() != ""]


@dataclass
class ExperimentConfig:
    """Everything one fit or sweep needs; built by the CLI or directly in code."""

    input_path: str | None = None
    input_format: str = "csv-samples"
    estimator: str = "mle"
    lambdas: list = field(default_factory=lambda: [0.1])
    gammas: list = field(default_factory=lambda: [1.0])
    rank: int = 0
    t_sparse: float | None = None
    t_spectral: float | None = None
    tol: float = 1e-7
    max_iter: int = 2000
    seed: int = 0
    n: int | None = None
    center: bool = False
    jobs: int = 1
    output: str | None = None
    csv_out: str | None = None
    truth_path: str | None = None

    def solver_options(self):
        return SolverOptions(
            max_iter=self.max_iter, tol_primal=self.tol, tol_dual=self.tol
        )

    def validate(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(
                f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}"
            )
        if not self.lambdas or not self.gammas:
            raise ValueError("lambda and gamma grids must be non-empty")
        if self.estimator in ("mle", "composite", "dantzig"):
            if any(l <= 0 for l in self.lambdas):
                raise ValueError(
                    "lambda values must be > 0 for likelihood-based estimators"
                )


def load_problem(config):
    """Resolve (SampleCovariance, truth-or-None) from a config."""
    if config.input_path is None:
        raise ValueError("no input given")
    loaded = lvio.read_input(
        config.input_path, config.input_format, n=config.n, center=config.center
    )
    truth = None
    if isinstance(loaded, SyntheticModel):
        truth = loaded
        if config.n is not None:
            X = draw_samples(loaded, config.n, seed=config.seed)
            Sigma = sample_covariance(X, center=config.center)
        else:
            Sigma = SampleCovariance(matrix=loaded.cov_O, n=None)
    else:
        Sigma = loaded
    if truth is None and config.truth_path is not None:
        truth = lvio.read_input(config.truth_path, "model-json")
    return Sigma, truth


def _fit_cell(Sigma, estimator, lam, gamma, config):
    """Dispatch one estimator run; returns (FitReport, objective_for_table)."""
    opts = config.solver_options()
    if estimator == "mle":
        report = fit_mle(Sigma, RegularizationParams(lam, gamma), opts)
        return report, report.objective
    if estimator == "composite":
        reg = RegularizationParams(lam, gamma)
        M_hat, nd, inner = fit_via_composite(Sigma, reg, opts)
        ll = gaussian_log_likelihood(M_hat, Sigma)
        objective = -ll + lam * nd.value
        report = FitReport(
            decomp=PrecisionDecomposition(S=nd.S, L=nd.L),
            objective=objective,
            iterations=inner.iterations,
            primal_residual=inner.primal_residual,
            dual_residual=inner.dual_residual,
            converged=inner.converged and nd.meta.get("converged", True),
            history=inner.history,
            meta={
                "estimator": "composite",
                "norm_value": nd.value,
                "norm_residual": nd.residual,
                "one_step_objective": inner.objective,
            },
        )
        return report, objective
    if estimator == "dantzig":
        report = fit_dantzig(Sigma, RegularizationParams(lam, gamma), opts)
        return report, report.objective
    if estimator == "em":
        report = fit_em_rank(Sigma, lam, config.rank, opts=opts)
        return report, report.objective
    if estimator == "threshold":
        if config.t_sparse is not None and config.t_spectral is not None:
            thr = ThresholdParams(config.t_sparse, config.t_spectral)
        else:
            thr = threshold_defaults(Sigma.p, Sigma.n)
            if config.t_sparse is not None:
                thr = ThresholdParams(config.t_sparse, thr.t_spectral)
            if config.t_spectral is not None:
                thr = ThresholdParams(thr.t_sparse, config.t_spectral)
        report = fit_two_step_threshold(Sigma, thr)
        return report, report.objective
    raise ValueError(f"unknown estimator {estimator!r}")


def _metrics_doc(report, truth):
    if truth is None:
        return None
    m = recovery_metrics(report.decomp, truth)
    return {
        "sign_consistent": bool(m.sign_consistent),
        "false_positives": int(m.support_errors[0]),
        "false_negatives": int(m.support_errors[1]),
        "rank_correct": bool(m.rank_correct),
        "rank_est": int(m.rank_est),
        "rank_true": int(m.rank_true),
        "loss_linf": float(m.loss_linf),
        "loss_spectral": float(m.loss_spectral),
        "loss_frob_total": float(m.loss_frob_total),
    }


def _kkt_doc(Sigma, report, lam, gamma):
    if report.meta.get("estimator") not in ("mle", "composite"):
        return None
    if not report.decomp.is_feasible():
        return None
    rep = kkt_report(Sigma, report.decomp, RegularizationParams(lam, gamma))
    return {k: float(v) for k, v in rep.as_dict().items()}


def _support_size(S):
    p = S.shape[0]
    off = S != 0.0
    np.fill_diagonal(off, False)
    return int(off.sum() // 2)


def report_doc(report, Sigma, lam, gamma, estimator, truth=None, wall_time_ms=None):
    """JSON-able单-fit report document."""
    doc = {
        "estimator": estimator,
        "lambda": lam,
        "gamma": gamma,
        "p": int(report.decomp.p),
        "objective": float(report.objective),
        "iterations": int(report.iterations),
        "converged": bool(report.converged),
        "kkt": _kkt_doc(Sigma, report, lam, gamma) if lam is not None else None,
        "S_triplets": lvio.matrix_triplets(report.decomp.S),
        "L_eigenpairs": lvio.eigenpairs(report.decomp.L),
        "support_size": _support_size(report.decomp.S),
        "rank": numeric_rank(report.decomp.L, 1e-6),
        "metrics": _metrics_doc(report, truth),
        "meta": {
            k: v
            for k, v in report.meta.items()
            if isinstance(v, (str, int, float, bool, type(None)))
        },
    }
    if wall_time_ms is not None:
        doc["wall_time_ms"] = wall_time_ms
    return doc


def run_fit(config):
    """Run a single-(lambda, gamma) fit; returns (doc, exit_code)."""
    config.validate()
    Sigma, truth = load_problem(config)
    lam = config.lambdas[0] if config.estimator != "threshold" else None
    gamma = config.gammas[0] if config.estimator in SWEEP_ESTIMATORS else None
    t0 = time.perf_counter()
    report, _ = _fit_cell(Sigma, config.estimator, lam, gamma, config)
    wall = (time.perf_counter() - t0) * 1000.0
    doc = report_doc(
        report, Sigma, lam, gamma, config.estimator, truth, wall_time_ms=wall
    )
    if config.output:
        lvio.dump_json(doc, config.output)
    return doc, (0 if report.converged else 2)


# -- sweep ------------------------------------------------------------------

_WORKER_STATE = {}


def _sweep_worker_init(payload):
    _WORKER_STATE["payload"] = payload


def _run_sweep_cell(task):
    index, lam, gamma = task
    payload = _WORKER_STATE["payload"]
    return _sweep_cell_result(payload, index, lam, gamma)


def _sweep_cell_result(payload, index, lam, gamma):
    Sigma = SampleCovariance(matrix=payload["sigma"], n=payload["n"])
    config = payload["config"]
    try:
        report, objective = _fit_cell(Sigma, config.estimator, lam, gamma, config)
    except Exception as exc:  # cell failures are recorded, never fatal
        return {
            "index": index,
            "lambda": lam,
            "gamma": gamma,
            "error": f"{type(exc).__name__}: {exc}",
        }
    return {
        "index": index,
        "lambda": lam,
        "gamma": gamma,
        "error": None,
        "doc": report_doc(report, Sigma, lam, gamma, config.estimator),
        "S": report.decomp.S,
        "L": report.decomp.L,
        "converged": report.converged,
    }


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def run_sweep(config, truth=None):
    """Run the (lambda, gamma) grid; returns (sweep_doc, csv_text).

    Cells are computed independently (possibly in parallel) and assembled in
    grid order, so the result does not depend on scheduling. Failures are
    recorded per cell.
    """
    config.validate()
    if config.estimator not in SWEEP_ESTIMATORS:
        raise ValueError(
            f"sweep supports estimators {SWEEP_ESTIMATORS}, got {config.estimator!r}"
        )
    Sigma, loaded_truth = load_problem(config)
    if truth is None:
        truth = loaded_truth
    lambdas = sorted(set(config.lambdas))
    gammas = sorted(set(config.gammas))

    tasks = []
    index = 0
    for lam in lambdas:
        for gamma in gammas:
            tasks.append((index, lam, gamma))
            index += 1

    payload = {"sigma": Sigma.matrix, "n": Sigma.n, "config": config}
    if config.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=config.jobs,
            initializer=_sweep_worker_init,
            initargs=(payload,),
        ) as pool:
            results = list(pool.map(_run_sweep_cell, tasks, chunksize=1))
    else:
        results = [_sweep_cell_result(payload, *task) for task in tasks]
    results.sort(key=lambda r: r["index"])

    # per-lambda-row gamma-stability summaries
    stability_docs = []
    n_g = len(gammas)
    for li, lam in enumerate(lambdas):
        row = results[li * n_g : (li + 1) * n_g]
        pairs = []
        for cell in row:
            if cell["error"] is None:
                stub = FitReport(
                    decomp=PrecisionDecomposition(S=cell["S"], L=cell["L"]),
                    objective=cell["doc"]["objective"],
                    iterations=cell["doc"]["iterations"],
                    primal_residual=0.0,
                    dual_residual=0.0,
                    converged=cell["converged"],
                    history=None,
                )
                pairs.append((cell["gamma"], stub))
        if pairs:
            summary = gamma_stability(pairs, truth=truth)
            stability_docs.append(
                {
                    "lambda": lam,
                    "intervals": [
                        {
                            "gamma_lo": iv.gamma_lo,
                            "gamma_hi": iv.gamma_hi,
                            "n_cells": iv.n_cells,
                            "support_size": iv.support_size,
                            "rank": iv.rank,
                            "exact_recovery": iv.exact_recovery,
                            "ratio": iv.ratio,
                        }
                        for iv in summary.intervals
                    ],
                }
            )
        else:
            stability_docs.append({"lambda": lam, "intervals": []})

    # aggregate plot-ready table
    header = [
        "lambda",
        "gamma",
        "objective",
        "support_size",
        "rank",
        "loss_linf",
        "loss_spectral",
        "loss_frob_total",
    ]
    lines = [",".join(header)]
    cells_doc = []
    for cell in results:
        if cell["error"] is not None:
            lines.append(
                ",".join(
                    [_csv_cell(cell["lambda"]), _csv_cell(cell["gamma"])] + [""] * 6
                )
            )
            cells_doc.append(
                {
                    "lambda": cell["lambda"],
                    "gamma": cell["gamma"],
                    "error": cell["error"],
                }
            )
            continue
        doc = dict(cell["doc"])
        doc["error"] = None
        if truth is not None:
            m = recovery_metrics(
                PrecisionDecomposition(S=cell["S"], L=cell["L"]), truth
            )
            doc["metrics"] = {
                "sign_consistent": bool(m.sign_consistent),
                "false_positives": int(m.support_errors[0]),
                "false_negatives": int(m.support_errors[1]),
                "rank_correct": bool(m.rank_correct),
                "rank_est": int(m.rank_est),
                "rank_true": int(m.rank_true),
                "loss_linf": float(m.loss_linf),
                "loss_spectral": float(m.loss_spectral),
                "loss_frob_total": float(m.loss_frob_total),
            }
            losses = [m.loss_linf, m.loss_spectral, m.loss_frob_total]
        else:
            losses = [None, None, None]
        cells_doc.append(doc)
        lines.append(
            ",".join(
                [
                    _csv_cell(cell["lambda"]),
                    _csv_cell(cell["gamma"]),
                    _csv_cell(doc["objective"]),
                    _csv_cell(doc["support_size"]),
                    _csv_cell(doc["rank"]),
                ]
                + [_csv_cell(x) for x in losses]
            )
        )
    csv_text = "\n".join(lines) + "\n"

    sweep_doc = {
        "estimator": config.estimator,
        "lambdas": lambdas,
        "gammas": gammas,
        "jobs": config.jobs,
        "seed": config.seed,
        "cells": cells_doc,
        "stability": stability_docs,
    }
    if config.output:
        lvio.dump_json(sweep_doc, config.output)
    if config.csv_out:
        with open(config.csv_out, "w") as fh:
            fh.write(csv_text)
    return sweep_doc, csv_text


# -- click commands ---------------------------------------------------------


@click.group()
def main():
    """Sparse + low-rank precision decomposition toolkit."""


def _common_fit_options(fn):
    for opt in reversed(
        [
            click.option("--input", "input_path", required=True, help="input file"),
            click.option(
                "--format",
                "input_format",
                type=click.Choice(lvio.INPUT_FORMATS),
                default="csv-samples",
                show_default=True,
            ),
            click.option(
                "--estimator",
                type=click.Choice(ESTIMATORS),
                default="mle",
                show_default=True,
            ),
            click.option("--lambda", "lam", default="0.1", help="value or grid"),
            click.option("--gamma", default="1.0", help="value or grid"),
            click.option("--rank", default=0, show_default=True),
            click.option("--t-sparse", type=float, default=None),
            click.option("--t-spectral", type=float, default=None),
            click.option("--tol", type=float, default=1e-7, show_default=True),
            click.option("--max-iter", default=2000, show_default=True),
            click.option("--seed", default=0, show_default=True),
            click.option("--n", type=int, default=None, help="sample count"),
            click.option("--center", is_flag=True, help="mean-center samples"),
            click.option("--output", default=None, help="JSON report path"),
            click.option("--truth", "truth_path", default=None),
        ]
    ):
        fn = opt(fn)
    return fn


def _build_config(**kw):
    return ExperimentConfig(
        input_path=kw["input_path"],
        input_format=kw["input_format"],
        estimator=kw["estimator"],
        lambdas=parse_grid(kw["lam"]),
        gammas=parse_grid(kw["gamma"]),
        rank=kw["rank"],
        t_sparse=kw["t_sparse"],
        t_spectral=kw["t_spectral"],
        tol=kw["tol"],
        max_iter=kw["max_iter"],
        seed=kw["seed"],
        n=kw["n"],
        center=kw["center"],
        jobs=kw.get("jobs", 1),
        output=kw["output"],
        csv_out=kw.get("csv_out"),
        truth_path=kw["truth_path"],
    )


@main.command()
@_common_fit_options
def fit(**kw):
    """Fit one estimator at a single (lambda, gamma)."""
    try:
        config = _build_config(**kw)
        doc, code = run_fit(config)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if not config.output:
        click.echo(lvio.dump_json(doc))
    else:
        click.echo(f"wrote {config.output}")
    sys.exit(code)


@main.command()
@_common_fit_options
@click.option("--jobs", default=1, show_default=True, help="parallel workers")
@click.option("--csv-out", default=None, help="aggregate CSV path")
def sweep(**kw):
    """Run a (lambda, gamma) grid sweep."""
    try:
        config = _build_config(**kw)
        doc, csv_text = run_sweep(config)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if not config.output and not config.csv_out:
        click.echo(csv_text, nl=False)
    else:
        targets = [t for t in (config.output, config.csv_out) if t]
        click.echo(f"wrote {', '.join(targets)}")
    n_failed = sum(1 for c in doc["cells"] if c.get("error"))
    sys.exit(0 if n_failed == 0 else 2)


@main.command()
@click.option("--p", "p", required=True, type=int, help="observed variables")
@click.option("--latents", "h", default=0, show_default=True, help="latent count")
@click.option("--max-degree", default=3, show_default=True)
@click.option("--latent-fanout", default=1.0, show_default=True)
@click.option("--edge-strength", default=0.3, show_default=True)
@click.option("--latent-strength", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--n", type=int, default=None, help="also draw n sample rows")
@click.option("--output", required=True, help="model JSON path")
@click.option("--samples-out", default=None, help="samples CSV path")
def generate(p, h, max_degree, latent_fanout, edge_strength, latent_strength,
             seed, n, output, samples_out):
    """Generate a ground-truth latent-variable model (and optionally samples)."""
    try:
        model = generate_latent_model(
            p, h, max_degree, latent_fanout, edge_strength, latent_strength, seed
        )
        save_model(model, output)
        if samples_out is not None:
            if n is None:
                raise ValueError("--samples-out needs --n")
            X = draw_samples(model, n, seed=seed)
            np.savetxt(samples_out, X, delimiter=",")
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {output}")


@main.command()
@click.option("--input", "input_path", required=True)
@click.option(
    "--format",
    "input_format",
    type=click.Choice(["mtx-covariance"]),
    default="mtx-covariance",
    show_default=True,
)
@click.option("--gamma", type=float, required=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--max-iter", default=5000, show_default=True)
@click.option("--output", default=None)
def decompose(input_path, input_format, gamma, tol, max_iter, output):
    """Evaluate the composite sparse/low-rank norm of a symmetric matrix."""
    try:
        M = lvio.read_covariance_mtx(input_path, require_psd=False)
        nd = composite_norm(
            M, gamma, SolverOptions(max_iter=max_iter, tol_primal=tol, tol_dual=tol)
        )
        doc = {
            "gamma": gamma,
            "value": nd.value,
            "residual": nd.residual,
            "p": int(M.shape[0]),
            "S_triplets": lvio.matrix_triplets(nd.S),
            "L_eigenpairs": lvio.eigenpairs(nd.L),
            "iterations": nd.meta["iterations"],
        }
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if output:
        lvio.dump_json(doc, output)
        click.echo(f"wrote {output}")
    else:
        click.echo(lvio.dump_json(doc))


@main.command()
@click.option("--report", "report_path", required=True, help="fit JSON report")
@click.option("--input", "input_path", required=True, help="covariance input")
@click.option(
    "--format",
    "input_format",
    type=click.Choice(lvio.INPUT_FORMATS),
    default="csv-samples",
    show_default=True,
)
@click.option("--lambda", "lam", type=float, default=None, help="override lambda")
@click.option("--gamma", type=float, default=None, help="override gamma")
@click.option("--n", type=int, default=None)
@click.option("--truth", "truth_path", default=None)
@click.option("--output", default=None)
def diagnose(report_path, input_path, input_format, lam, gamma, n, truth_path, output):
    """Recompute KKT residuals and recovery metrics for a stored fit."""
    import json

    try:
        with open(report_path) as fh:
            stored = json.load(fh)
        p = int(stored["p"])
        S = lvio.triplets_to_matrix(stored["S_triplets"], p)
        L = lvio.eigenpairs_to_matrix(stored["L_eigenpairs"], p)
        decomp = PrecisionDecomposition(S=S, L=L)
        config = ExperimentConfig(
            input_path=input_path, input_format=input_format, n=n
        )
        Sigma, truth = load_problem(config)
        if truth is None and truth_path:
            truth = lvio.read_input(truth_path, "model-json")
        lam = lam if lam is not None else stored.get("lambda")
        gamma = gamma if gamma is not None else stored.get("gamma")
        doc = {"report": report_path, "lambda": lam, "gamma": gamma}
        feasible, reason = decomp.feasibility()
        doc["feasible"] = feasible
        doc["feasibility_reason"] = reason
        if feasible and lam is not None and gamma is not None:
            reg = RegularizationParams(lam, gamma)
            doc["kkt"] = {
                k: float(v) for k, v in kkt_report(Sigma, decomp, reg).as_dict().items()
            }
            doc["objective"] = objective_value(decomp, Sigma, reg)
        if truth is not None:
            stub = FitReport(
                decomp=decomp, objective=math.nan, iterations=0,
                primal_residual=0.0, dual_residual=0.0, converged=True, history=None,
            )
            doc["metrics"] = _metrics_doc(stub, truth)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if output:
        lvio.dump_json(doc, output)
        click.echo(f"wrote {output}")
    else:
        click.echo(lvio.dump_json(doc))


if __name__ == "__main__":
    main()
