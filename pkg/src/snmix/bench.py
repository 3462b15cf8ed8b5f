"""Replication harness for the Monte-Carlo studies.

Runs (estimator, sample size, fitted order, initialization) cells over many
replications, collecting bias/RMSE tables, degeneracy counts and mixing-CDF
distances, with fully deterministic seeding: every random stream is keyed by
the master seed plus structural indices, so reports do not depend on worker
count or execution order.

Two presets mirror the standard two-component test beds:

    MODEL_I  = 0.5 SN(-2, 1, 2) + 0.5 SN(2, 2, 1)     (well separated)
    MODEL_II = 0.5 SN(-1, 2, 1) + 0.5 SN(1.5, 2, -1)  (strongly overlapping)
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import AzzaliniShapePenalty, PenaltySpec, ShapePenalty, SnMixture, tuning
from .estimator import FitConfig, FitResult, fit, profile_lrt_me
from .init import KMeansMoments, PerturbedStart, TrueValue
from .metrics import bias_rmse, distance_Dstar
from .sampler import child_rng, child_seed_int, sample_mixture

__all__ = [
    "MODEL_I",
    "MODEL_II",
    "StudySpec",
    "CellResult",
    "StudyReport",
    "run_study",
    "run_penalty_comparison",
]

MODEL_I = SnMixture.from_arrays([0.5, 0.5], [-2.0, 2.0], [1.0, 2.0], [2.0, 1.0])
MODEL_II = SnMixture.from_arrays([0.5, 0.5], [-1.0, 1.5], [2.0, 2.0], [1.0, -1.0])

_ESTIMATORS = ("mle", "pmle", "me", "mple")
_INITS = ("true", "kmeans", "perturbed")

# namespace tags for derived random streams
_NS_DATA = 11
_NS_KMEANS = 22
_NS_PERTURB = 33


@dataclass(frozen=True)
class StudySpec:
    """One simulation study: a truth, a grid of cells, and a seed."""

    truth: SnMixture
    sample_sizes: tuple[int, ...]
    fit_orders: tuple[int, ...]
    replications: int
    estimators: tuple[str, ...]
    init_schemes: tuple[str, ...]
    master_seed: int
    log_sigma_stats: bool = False
    algorithm: str = "ecm"
    max_iter: int = 2000
    rel_tol: float = 1e-6
    c_a: float = 1.0
    c_b: float = 0.05
    n_perturbed_starts: int = 10

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(n < 10 for n in self.sample_sizes):
            raise ValueError("sample sizes must be >= 10")
        bad = set(self.estimators) - set(_ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators: {sorted(bad)}")
        bad = set(self.init_schemes) - set(_INITS)
        if bad:
            raise ValueError(f"unknown init schemes: {sorted(bad)}")


@dataclass
class CellResult:
    estimator: str
    n: int
    p: int
    init: str
    replications: int
    param_stats: dict[str, tuple[float, float]] | None
    sigma_degeneracies: int
    lambda_divergences: int
    mean_dstar: float | None
    failures: int
    elapsed_sec: float


@dataclass
class StudyReport:
    meta: dict
    cells: list[CellResult] = field(default_factory=list)

    _CSV_HEADER = (
        "estimator,n,p,init,param,bias,rmse,"
        "sigma_degeneracies,lambda_divergences,mean_dstar,replications,failures"
    )

    def to_csv(self) -> str:
        """Deterministic CSV: one row per parameter per cell (a single row
        with an empty param field when a cell has no parameter table).
        Timing is reported only in the JSON form, so equal-seed runs give
        byte-identical CSV regardless of thread count."""

        def num(x) -> str:
            if x is None:
                return ""
            return repr(float(x))

        lines = [self._CSV_HEADER]
        for c in self.cells:
            common = (
                f"{c.estimator},{c.n},{c.p},{c.init}",
                f"{c.sigma_degeneracies},{c.lambda_divergences},{num(c.mean_dstar)},"
                f"{c.replications},{c.failures}",
            )
            if c.param_stats:
                for name, (bias, rmse) in c.param_stats.items():
                    lines.append(f"{common[0]},{name},{num(bias)},{num(rmse)},{common[1]}")
            else:
                lines.append(f"{common[0]},,,,{common[1]}")
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "meta": self.meta,
            "cells": [
                {
                    "estimator": c.estimator,
                    "n": c.n,
                    "p": c.p,
                    "init": c.init,
                    "replications": c.replications,
                    "param_stats": (
                        {k: [v[0], v[1]] for k, v in c.param_stats.items()}
                        if c.param_stats
                        else None
                    ),
                    "sigma_degeneracies": c.sigma_degeneracies,
                    "lambda_divergences": c.lambda_divergences,
                    "mean_dstar": c.mean_dstar,
                    "failures": c.failures,
                    "elapsed_sec": c.elapsed_sec,
                }
                for c in self.cells
            ],
        }

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        json_path = out / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.to_json_obj(), indent=2) + "\n")
        return csv_path, json_path


def _penalty_for(estimator: str, data: np.ndarray, spec: StudySpec) -> PenaltySpec:
    if estimator in ("mle", "me"):
        return PenaltySpec()
    if estimator == "pmle":
        return PenaltySpec.recommended(data, spec.c_a, spec.c_b)
    if estimator == "mple":
        return PenaltySpec(sigma=None, lam=AzzaliniShapePenalty())
    raise ValueError(estimator)


def _fit_once(data, p, init_obj, penalty, spec: StudySpec) -> FitResult:
    cfg = FitConfig(
        init=init_obj,
        algorithm=spec.algorithm,
        penalty=penalty,
        max_iter=spec.max_iter,
        rel_tol=spec.rel_tol,
    )
    return fit(data, p, cfg)


def _best_perturbed_fit(data, p, penalty, spec: StudySpec, n: int, rep: int) -> FitResult:
    # the same ten jittered starts are reused by every estimator on a
    # given data set, so estimator comparisons share their starting points
    best: FitResult | None = None
    for s in range(spec.n_perturbed_starts):
        seed = _seed_int(spec.master_seed, _NS_PERTURB, n, p, rep, s)
        res = _fit_once(data, p, PerturbedStart(spec.truth, seed), penalty, spec)
        if best is None or (
            np.isfinite(res.objective)
            and (not np.isfinite(best.objective) or res.objective > best.objective)
        ):
            best = res
    return best


_seed_int = child_seed_int


def _run_replication(spec: StudySpec, estimator: str, n: int, p: int, init: str, rep: int) -> dict:
    t0 = time.perf_counter()
    try:
        data = sample_mixture(spec.truth, n, child_rng(spec.master_seed, _NS_DATA, n, rep))

        if estimator == "me":
            result = _do_fit(spec, "mle", data, n, p, init, rep)
            if result.degenerate_sigma:
                return {"failed": True, "elapsed": time.perf_counter() - t0}
            lam_me = profile_lrt_me(data, result)
            start = SnMixture.from_arrays(
                result.psi.weights_array, result.psi.mu, result.psi.sigma2, lam_me
            )
            cfg = FitConfig(
                init=start,
                algorithm=spec.algorithm,
                penalty=PenaltySpec(),
                max_iter=spec.max_iter,
                rel_tol=spec.rel_tol,
                fixed_lambda=tuple(float(v) for v in lam_me),
            )
            result = fit(data, p, cfg)
        else:
            result = _do_fit(spec, estimator, data, n, p, init, rep)

        dstar = distance_Dstar(result.psi, spec.truth, warn=False)
        return {
            "failed": False,
            "weights": result.psi.weights,
            "mu": tuple(result.psi.mu),
            "sigma2": tuple(result.psi.sigma2),
            "lam": tuple(result.psi.lam),
            "degenerate_sigma": result.degenerate_sigma,
            "divergent_lambda": result.divergent_lambda,
            "dstar": dstar,
            "elapsed": time.perf_counter() - t0,
        }
    except Exception:
        return {"failed": True, "elapsed": time.perf_counter() - t0}


def _do_fit(spec: StudySpec, estimator: str, data, n, p, init, rep) -> FitResult:
    penalty = _penalty_for(estimator, data, spec)
    if init == "true":
        return _fit_once(data, p, TrueValue(spec.truth), penalty, spec)
    if init == "kmeans":
        seed = _seed_int(spec.master_seed, _NS_KMEANS, n, p, rep)
        return _fit_once(data, p, KMeansMoments(seed), penalty, spec)
    if init == "perturbed":
        return _best_perturbed_fit(data, p, penalty, spec, n, rep)
    raise ValueError(init)


def _cell_jobs(spec: StudySpec):
    p0 = spec.truth.p
    for estimator in spec.estimators:
        for n in spec.sample_sizes:
            for p in spec.fit_orders:
                for init in spec.init_schemes:
                    if init == "true" and p != p0:
                        continue
                    if init == "perturbed" and p < p0:
                        continue
                    yield estimator, n, p, init


def _job(args):
    spec, estimator, n, p, init, rep = args
    return _run_replication(spec, estimator, n, p, init, rep)


def run_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Execute every cell of the study; deterministic given the master seed.

    ``threads`` > 1 fans replications out to worker processes; results are
    reduced in replication order, so the thread count changes runtime only.
    """
    cells = list(_cell_jobs(spec))
    jobs = [
        (spec, estimator, n, p, init, rep)
        for (estimator, n, p, init) in cells
        for rep in range(spec.replications)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            flat = list(ex.map(_job, jobs, chunksize=max(1, len(jobs) // (8 * threads))))
    else:
        flat = [_job(j) for j in jobs]

    report = StudyReport(
        meta={
            "truth": {
                "weights": list(spec.truth.weights),
                "mu": list(spec.truth.mu),
                "sigma2": list(spec.truth.sigma2),
                "lambda": list(spec.truth.lam),
            },
            "replications": spec.replications,
            "master_seed": spec.master_seed,
            "algorithm": spec.algorithm,
            "log_sigma_stats": spec.log_sigma_stats,
        }
    )
    p0 = spec.truth.p
    idx = 0
    for estimator, n, p, init in cells:
        reps = flat[idx : idx + spec.replications]
        idx += spec.replications
        failures = sum(1 for r in reps if r["failed"])
        good = [r for r in reps if not r["failed"]]
        sigma_deg = sum(1 for r in good if r["degenerate_sigma"])
        lambda_div = sum(1 for r in good if r["divergent_lambda"])
        dstars = [r["dstar"] for r in good if r.get("dstar") is not None]
        mean_dstar = float(np.mean(dstars)) if dstars else None
        param_stats = None
        if p == p0 and good:
            psis = [
                SnMixture.from_arrays(r["weights"], r["mu"], r["sigma2"], r["lam"])
                for r in good
            ]
            param_stats = bias_rmse(psis, spec.truth, log_sigma=spec.log_sigma_stats)
        report.cells.append(
            CellResult(
                estimator=estimator,
                n=n,
                p=p,
                init=init,
                replications=spec.replications,
                param_stats=param_stats,
                sigma_degeneracies=sigma_deg,
                lambda_divergences=lambda_div,
                mean_dstar=mean_dstar,
                failures=failures,
                elapsed_sec=float(sum(r.get("elapsed", 0.0) for r in reps)),
            )
        )
    return report


# ---------------------------------------------------------------------------
# Single-component penalty comparison


def run_penalty_comparison(
    n_list=(50, 100, 250, 350, 500, 1000),
    lambda_list=(5.0,),
    reps: int = 200,
    seed: int = 0,
    threads: int = 1,
    mu: float = 0.0,
    sigma2: float = 1.0,
) -> StudyReport:
    """Head-to-head shape-penalty comparison on a single component.

    For each (n, lambda) cell, ``reps`` data sets of size n are drawn from
    SN(mu, sigma2, lambda) and fitted twice: with the quadratic-tail shape
    penalty only ("pmle") and with the logarithmic one ("mple").  Each cell
    reports bias and RMSE of the shape estimate plus their logs, ready for
    log-log plotting against n.
    """
    jobs = [
        (seed, n, float(lam), rep, mu, sigma2)
        for lam in lambda_list
        for n in n_list
        for rep in range(reps)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            flat = list(ex.map(_penalty_job, jobs, chunksize=max(1, len(jobs) // (8 * threads) or 1)))
    else:
        flat = [_penalty_job(j) for j in jobs]

    report = StudyReport(
        meta={
            "study": "penalty-comparison",
            "mu": mu,
            "sigma2": sigma2,
            "lambda_list": [float(x) for x in lambda_list],
            "n_list": [int(x) for x in n_list],
            "replications": reps,
            "master_seed": seed,
        }
    )
    idx = 0
    for lam in lambda_list:
        for n in n_list:
            chunk = flat[idx : idx + reps]
            idx += reps
            elapsed = float(sum(r.get("elapsed", 0.0) for r in chunk))
            for est in ("pmle", "mple"):
                vals = np.array([r[est] for r in chunk if r[est] is not None])
                failures = sum(1 for r in chunk if r[est] is None)
                err = vals - float(lam)
                bias = float(np.mean(err))
                rmse = float(np.sqrt(np.mean(err * err)))
                stats = {
                    "lambda_1": (bias, rmse),
                    "log_lambda_1": (float(np.log(abs(bias))), float(np.log(rmse))),
                }
                divergences = int(np.sum(np.abs(vals) > 100.0))
                report.cells.append(
                    CellResult(
                        estimator=est,
                        n=int(n),
                        p=1,
                        init="kmeans",
                        replications=reps,
                        param_stats=stats,
                        sigma_degeneracies=0,
                        lambda_divergences=divergences,
                        mean_dstar=None,
                        failures=failures,
                        elapsed_sec=elapsed,
                    )
                )
    return report


def _penalty_job(args):
    seed, n, lam, rep, mu, sigma2 = args
    t0 = time.perf_counter()
    truth = SnMixture.from_arrays([1.0], [mu], [sigma2], [lam])
    key = int(round(lam * 1000))
    data = sample_mixture(truth, n, child_rng(seed, _NS_DATA, key, n, rep))
    out = {}
    b_n = tuning(n)[1]
    for est, pen in (
        ("pmle", PenaltySpec(lam=ShapePenalty(b_n))),
        ("mple", PenaltySpec(lam=AzzaliniShapePenalty())),
    ):
        try:
            seed_i = _seed_int(seed, _NS_KMEANS, key, n, rep)
            res = fit(data, 1, FitConfig(init=KMeansMoments(seed_i), penalty=pen))
            out[est] = float(res.psi.lam[0])
        except Exception:
            out[est] = None
    out["elapsed"] = time.perf_counter() - t0
    return out
