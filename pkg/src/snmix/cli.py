"""Command-line interface.

Subcommands: ``fit`` (estimate a mixture from CSV data), ``sample`` (draw
synthetic data), ``study`` (run a simulation study preset or spec file) and
``me`` (maximum likelihood plus profile-LRT shape shrinkage).

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 fit finished but
carries degeneracy flags, 4 shape shrinkage refused (collapsed variance).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .core import AzzaliniShapePenalty, PenaltySpec, SnMixture
from .estimator import FitConfig, FitResult, MEValidityError, fit, profile_lrt_me
from .init import KMeansMoments
from .sampler import child_seed_int, make_rng, sample_mixture

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DEGENERATE = 3
EXIT_ME_INVALID = 4

SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; our convention reserves 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


class CliIOError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Model document (de)serialization


def model_to_doc(psi: SnMixture, fit_meta: dict | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "p": psi.p,
        "weights": [float(w) for w in psi.weights],
        "mu": [float(v) for v in psi.mu],
        "sigma2": [float(v) for v in psi.sigma2],
        "lambda": [float(v) for v in psi.lam],
    }
    if fit_meta is not None:
        doc["fit"] = fit_meta
    return doc


def doc_to_model(doc: dict) -> SnMixture:
    p = int(doc["p"])
    arrays = [doc["weights"], doc["mu"], doc["sigma2"], doc["lambda"]]
    if any(len(a) != p for a in arrays):
        raise ValueError("model document arrays must all have length p")
    return SnMixture.from_arrays(*arrays)


def _fit_meta(result: FitResult, estimator: str, algorithm: str, pen: PenaltySpec,
              seed: int, starts: int, tol: float) -> dict:
    pen_doc: dict = {"sigma": None, "lambda": None}
    if pen.sigma is not None:
        pen_doc["sigma"] = {"a_n": pen.sigma.a_n, "s_n2": pen.sigma.s_n2}
    if pen.lam is not None:
        if isinstance(pen.lam, AzzaliniShapePenalty):
            pen_doc["lambda"] = {"type": "azzalini", "c1": pen.lam.c1, "c2": pen.lam.c2}
        else:
            pen_doc["lambda"] = {"type": "quadratic-tail", "b_n": pen.lam.b_n}
    return {
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "degenerate_sigma": result.degenerate_sigma,
        "divergent_lambda": result.divergent_lambda,
        "estimator": estimator,
        "algorithm": algorithm,
        "penalty": pen_doc,
        "seed": seed,
        "starts": starts,
        "tol": tol,
    }


# ---------------------------------------------------------------------------
# CSV input


def read_data_csv(path: str, column: str | None = None) -> np.ndarray:
    """Read one numeric column from a CSV file.

    The header row is optional and auto-detected.  ``column`` selects by
    name (requires a header) or 0-based index; the default is the first
    column that parses as numeric.  Any non-numeric cell in the chosen
    column is an error reported with its line number.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliIOError(f"cannot read {path}: {exc}") from exc
    rows = [line.split(",") for line in text.splitlines() if line.strip() != ""]
    if not rows:
        raise CliIOError(f"{path}: empty input")

    def is_num(s: str) -> bool:
        try:
            float(s)
            return True
        except ValueError:
            return False

    header = rows[0] if not all(is_num(c.strip()) for c in rows[0]) else None
    body_start = 1 if header is not None else 0
    if not rows[body_start:]:
        raise CliIOError(f"{path}: no data rows")

    ncol = len(rows[body_start])
    if column is None:
        col_idx = None
        for j in range(ncol):
            if is_num(rows[body_start][j].strip()):
                col_idx = j
                break
        if col_idx is None:
            raise CliIOError(f"{path}: no numeric column found")
    elif column.isdigit():
        col_idx = int(column)
        if col_idx >= ncol:
            raise CliIOError(f"{path}: column index {col_idx} out of range")
    else:
        if header is None:
            raise CliIOError(f"{path}: column named {column!r} needs a header row")
        names = [c.strip() for c in header]
        if column not in names:
            raise CliIOError(f"{path}: no column named {column!r} (have {names})")
        col_idx = names.index(column)

    values = []
    for i, row in enumerate(rows[body_start:], start=body_start + 1):
        if col_idx >= len(row):
            raise CliIOError(f"{path}:{i}: missing column {col_idx}")
        cell = row[col_idx].strip()
        if not is_num(cell):
            raise CliIOError(f"{path}:{i}: non-numeric value {cell!r}")
        values.append(float(cell))
    return np.array(values)


# ---------------------------------------------------------------------------
# Shared fitting helpers


def _penalty_for(estimator: str, data: np.ndarray, c_a: float, c_b: float) -> PenaltySpec:
    if estimator == "mle":
        return PenaltySpec()
    if estimator == "pmle":
        return PenaltySpec.recommended(data, c_a, c_b)
    if estimator == "mple":
        return PenaltySpec(lam=AzzaliniShapePenalty())
    raise ValueError(estimator)


def _multi_start_fit(data, p, penalty, algorithm, starts, seed, tol) -> FitResult:
    best: FitResult | None = None
    for s in range(starts):
        cfg = FitConfig(
            init=KMeansMoments(child_seed_int(seed, 7, s)),
            algorithm=algorithm,
            penalty=penalty,
            rel_tol=tol,
        )
        res = fit(data, p, cfg)
        if best is None or (
            np.isfinite(res.objective)
            and (not np.isfinite(best.objective) or res.objective > best.objective)
        ):
            best = res
    return best


def _emit(doc: dict, output: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_fit(args) -> int:
    data = read_data_csv(args.input, args.column)
    pen = _penalty_for(args.estimator, data, args.c_a, args.c_b)
    result = _multi_start_fit(
        data, args.components, pen, args.algorithm, args.starts, args.seed, args.tol
    )
    meta = _fit_meta(result, args.estimator, args.algorithm, pen, args.seed, args.starts, args.tol)
    _emit(model_to_doc(result.psi, meta), args.output)
    return EXIT_DEGENERATE if (result.degenerate_sigma or result.divergent_lambda) else EXIT_OK


def cmd_sample(args) -> int:
    if args.n <= 0:
        print("error: --n must be positive", file=sys.stderr)
        return EXIT_USAGE
    if args.preset:
        psi = bench.MODEL_I if args.preset == "model1" else bench.MODEL_II
    else:
        try:
            doc = json.loads(Path(args.model).read_text())
            psi = doc_to_model(doc)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliIOError(f"cannot load model {args.model}: {exc}") from exc
    draws = sample_mixture(psi, args.n, make_rng(args.seed))
    lines = "\n".join(repr(float(v)) for v in draws) + "\n"
    if args.output:
        Path(args.output).write_text(lines)
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def _study_spec_from_preset(preset: str, reps: int, seed: int) -> bench.StudySpec:
    if preset == "model1":
        truth, log_sigma = bench.MODEL_I, False
    elif preset == "model2":
        truth, log_sigma = bench.MODEL_II, True
    elif preset == "order-study":
        return bench.StudySpec(
            truth=bench.MODEL_I,
            sample_sizes=(100, 200, 500),
            fit_orders=(2, 3, 4, 5),
            replications=reps,
            estimators=("mle", "pmle"),
            init_schemes=("perturbed",),
            master_seed=seed,
        )
    else:
        raise ValueError(preset)
    return bench.StudySpec(
        truth=truth,
        sample_sizes=(100, 200),
        fit_orders=(truth.p,),
        replications=reps,
        estimators=("mle", "pmle"),
        init_schemes=("true", "kmeans"),
        master_seed=seed,
        log_sigma_stats=log_sigma,
    )


def _study_spec_from_json(path: str, reps: int, seed: int) -> bench.StudySpec:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise CliIOError(f"cannot load study spec {path}: {exc}") from exc
    truth = doc_to_model(doc["truth"])
    return bench.StudySpec(
        truth=truth,
        sample_sizes=tuple(int(n) for n in doc["sample_sizes"]),
        fit_orders=tuple(int(p) for p in doc["fit_orders"]),
        replications=int(doc.get("replications", reps)),
        estimators=tuple(doc.get("estimators", ["mle", "pmle"])),
        init_schemes=tuple(doc.get("init_schemes", ["true"])),
        master_seed=int(doc.get("master_seed", seed)),
        log_sigma_stats=bool(doc.get("log_sigma_stats", False)),
    )


def cmd_study(args) -> int:
    if args.preset == "penalty-comparison":
        report = bench.run_penalty_comparison(reps=args.reps, seed=args.seed, threads=args.threads)
    elif args.preset:
        spec = _study_spec_from_preset(args.preset, args.reps, args.seed)
        report = bench.run_study(spec, threads=args.threads)
    else:
        spec = _study_spec_from_json(args.spec, args.reps, args.seed)
        report = bench.run_study(spec, threads=args.threads)
    try:
        csv_path, json_path = report.write(args.out)
    except OSError as exc:
        raise CliIOError(f"cannot write to {args.out}: {exc}") from exc
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


def cmd_me(args) -> int:
    data = read_data_csv(args.input, args.column)
    mle_result = _multi_start_fit(
        data, args.components, PenaltySpec(), args.algorithm, args.starts, args.seed, args.tol
    )
    try:
        lam_me = profile_lrt_me(data, mle_result, level=args.level)
    except MEValidityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ME_INVALID
    start = SnMixture.from_arrays(
        mle_result.psi.weights_array, mle_result.psi.mu, mle_result.psi.sigma2, lam_me
    )
    result = fit(
        data,
        args.components,
        FitConfig(
            init=start,
            algorithm=args.algorithm,
            penalty=PenaltySpec(),
            rel_tol=args.tol,
            fixed_lambda=tuple(float(v) for v in lam_me),
        ),
    )
    meta = _fit_meta(result, "me", args.algorithm, PenaltySpec(), args.seed, args.starts, args.tol)
    meta["level"] = args.level
    meta["mle_lambda"] = [float(v) for v in mle_result.psi.lam]
    _emit(model_to_doc(result.psi, meta), args.output)
    return EXIT_DEGENERATE if (result.degenerate_sigma or result.divergent_lambda) else EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="snmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_fit_flags(q, with_estimator: bool):
        q.add_argument("--input", required=True, help="CSV file with the data")
        q.add_argument("--column", default=None, help="column name or 0-based index")
        q.add_argument("--components", type=int, required=True, help="mixture order p")
        if with_estimator:
            q.add_argument("--estimator", choices=("mle", "pmle", "mple"), default="pmle")
        q.add_argument("--algorithm", choices=("ecm", "ecme"), default="ecm")
        q.add_argument("--starts", type=int, default=20, help="number of k-means starts")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--tol", type=float, default=1e-6)
        q.add_argument("--output", default=None, help="write the model JSON here (default stdout)")

    q = sub.add_parser("fit", help="fit a mixture to CSV data")
    add_fit_flags(q, with_estimator=True)
    q.add_argument("--c-a", dest="c_a", type=float, default=1.0)
    q.add_argument("--c-b", dest="c_b", type=float, default=0.05)
    q.set_defaults(func=cmd_fit)

    q = sub.add_parser("sample", help="draw synthetic data from a model")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model document JSON")
    src.add_argument("--preset", choices=("model1", "model2"))
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--output", default=None)
    q.set_defaults(func=cmd_sample)

    q = sub.add_parser("study", help="run a simulation study")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument(
        "--preset", choices=("model1", "model2", "order-study", "penalty-comparison")
    )
    src.add_argument("--spec", help="study spec JSON")
    q.add_argument("--reps", type=int, default=200)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True, help="output directory")
    q.add_argument("--threads", type=int, default=1)
    q.set_defaults(func=cmd_study)

    q = sub.add_parser("me", help="ML fit plus profile-LRT shape shrinkage")
    add_fit_flags(q, with_estimator=False)
    q.add_argument("--level", type=float, default=0.05)
    q.set_defaults(func=cmd_me)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
