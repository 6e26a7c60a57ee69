"""
Command-line entry point: fitting, comparison, tau profiling, dependence grids,
simulation, Kaplan-Meier tables, frailty checks and curve export.

Every subcommand writes JSON or CSV to stdout, or to --out. Exit codes: 0 on
success, 2 for bad input, 3 when an optimisation or quadrature fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import inflect
import pandas as pd
from pydantic import BaseModel, TypeAdapter, ValidationError
from rich.console import Console
from rich.table import Table

from bivariate_pgw.bivariate import BivariateModel
from bivariate_pgw.config import (
    DEFAULT_QUADRATURE,
    MODEL_PRESETS,
    TREATMENT_MODELS,
    FitOptions,
    default_log_level,
    load_model_spec,
)
from bivariate_pgw.copula import dependence_grid
from bivariate_pgw.errors import ConvergenceError, DomainError, InputError, OptimizationError
from bivariate_pgw.fitting import (
    FitResult,
    fit,
    kendall_tau_interval,
    parameter_interval,
    profile_tau,
    quantile_ratio,
)
from bivariate_pgw.frailty import FrailtyCheckReport, verify_result1, verify_resultA1, verify_weibull_extension_link
from bivariate_pgw.information_criteria import compare, format_criterion
from bivariate_pgw.models_schema import ColumnMap, CovariateTerm, ModelSpec
from bivariate_pgw.paired_io import RETINOPATHY_COLUMNS, PairedData, load_paired_csv, wide_frame
from bivariate_pgw.simulation import simulate_dataset
from bivariate_pgw.survival_curves import export_fitted_curves, kaplan_meier
from bivariate_pgw.univariate import MarginalFamily

p = inflect.engine()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3

COLUMN_PRESETS: Dict[str, ColumnMap] = {"retinopathy": RETINOPATHY_COLUMNS}


# -----------------------------------------------------------------------------
# Argument helpers
# -----------------------------------------------------------------------------

def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _covariate_term(text: str) -> CovariateTerm:
    target, sep, covariate = text.partition("=")
    if not sep or not covariate:
        raise argparse.ArgumentTypeError(f"expected TARGET=COVARIATE, got {text!r}")
    try:
        return CovariateTerm(target=target, covariate=covariate)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("data", type=Path, help="Paired survival CSV file.")
    parser.add_argument("--layout", choices=["wide", "long"], default="wide", help="CSV layout (default: wide).")
    parser.add_argument(
        "--columns",
        default=None,
        help="Column map: a preset name (retinopathy) or a ColumnMap JSON file.",
    )


def _add_fit_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--starts", type=int, default=None, help="Number of optimisation starts (default 5).")
    parser.add_argument("--tol", type=float, default=None, help="Gradient max-norm tolerance (default 1e-4).")
    parser.add_argument("--max-iter", type=int, default=None, help="Iteration cap per start (default 500).")
    parser.add_argument("--threads", type=int, default=None, help="Concurrent starts (default from environment).")


def _add_model_arguments(parser: argparse.ArgumentParser, default: Optional[str] = None) -> None:
    parser.add_argument(
        "--model",
        default=default,
        help=f"Preset ({', '.join(MODEL_PRESETS)}) or ModelSpec JSON file.",
    )
    parser.add_argument(
        "--constraint",
        action="append",
        default=[],
        choices=["common_phi", "common_gamma", "common_tau"],
        help="Equality constraint across margins; repeatable. Used when --model is not given.",
    )
    parser.add_argument(
        "--covariate",
        action="append",
        default=[],
        type=_covariate_term,
        metavar="TARGET=COVARIATE",
        help="Covariate effect such as phi1=D; repeatable. Used when --model is not given.",
    )
    parser.add_argument("--family", choices=[f.value for f in MarginalFamily], default=MarginalFamily.APGW.value)


def _column_map(source: Optional[str]) -> ColumnMap:
    if source is None:
        return ColumnMap()
    if source in COLUMN_PRESETS:
        return COLUMN_PRESETS[source]
    path = Path(source)
    if not path.exists():
        raise InputError(f"{source!r} is neither a column preset ({', '.join(COLUMN_PRESETS)}) nor a file")
    try:
        return ColumnMap.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_data(args: argparse.Namespace) -> PairedData:
    records = load_paired_csv(args.data, args.layout, _column_map(args.columns))
    if not records:
        raise InputError(f"{args.data} holds no records")
    return PairedData.from_records(records)


def _model_spec(args: argparse.Namespace) -> ModelSpec:
    if args.model is not None:
        return load_model_spec(args.model)
    return ModelSpec(
        name="cli model",
        constraints=args.constraint,
        covariate_terms=args.covariate,
        family=MarginalFamily(args.family),
    )


def _fit_options(args: argparse.Namespace) -> FitOptions:
    overrides = {
        "starts": args.starts,
        "grad_tol": args.tol,
        "max_iter": args.max_iter,
        "threads": args.threads,
        "seed": args.seed,
    }
    try:
        return FitOptions(**{key: value for key, value in overrides.items() if value is not None})
    except ValidationError as exc:
        raise InputError(str(exc)) from exc


# -----------------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------------

def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    out.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", out)


def _emit_frame(frame: pd.DataFrame, out: Optional[Path]) -> None:
    _emit(frame.to_csv(index=False), out)


def _emit_models(models: Sequence[BaseModel], out: Optional[Path]) -> None:
    _emit(json.dumps([json.loads(m.model_dump_json()) for m in models], indent=2), out)


def _print_fit_table(result: FitResult, console: Console) -> None:
    table = Table(title=f"{result.name or 'model'}: loglik {result.loglik:.2f}")
    table.add_column("Parameter")
    table.add_column("Estimate", justify="right")
    table.add_column("S.E.", justify="right")
    se = result.standard_errors
    for i, name in enumerate(result.layout.names):
        table.add_row(name, f"{result.theta_hat[i]:.2f}", "-" if se is None else f"{se[i]:.2f}")
    table.caption = (
        f"AIC {format_criterion(result.aic)}  BIC {format_criterion(result.bic)}  K {result.kendall_tau:.2f}"
    )
    console.print(table)


# -----------------------------------------------------------------------------
# Subcommands
# -----------------------------------------------------------------------------

def _cmd_fit(args: argparse.Namespace) -> int:
    data = _load_data(args)
    result = fit(_model_spec(args), data, _fit_options(args))
    _print_fit_table(result, Console(stderr=True))
    report = result.to_report()
    if args.derived and result.covariance_flagged:
        logger.warning("Skipping derived intervals: the covariance of %s is flagged", result.name or "the fit")
    if args.derived and not result.covariance_flagged:
        derived = {
            "kendall_tau": kendall_tau_interval(result).model_dump(),
            "quantile_ratio": quantile_ratio(result).model_dump(),
        }
        if "tau" in result.layout.names:
            derived["tau"] = parameter_interval(result, "tau").model_dump()
        document = json.loads(report.model_dump_json())
        document["derived"] = derived
        _emit(json.dumps(document, indent=2), args.out)
    else:
        _emit(report.model_dump_json(indent=2), args.out)
    return EXIT_OK if result.convergence.converged else EXIT_CONVERGENCE


def _cmd_compare(args: argparse.Namespace) -> int:
    data = _load_data(args)
    options = _fit_options(args)
    fits: List[FitResult] = []
    for name in args.models:
        fits.append(fit(load_model_spec(name), data, options))
        logger.info("Fitted %d of %d %s", len(fits), len(args.models), p.plural("model", len(args.models)))
    rows = compare(fits)
    if args.format == "json":
        _emit_models(rows, args.out)
    else:
        _emit_frame(pd.DataFrame([row.model_dump() for row in rows]), args.out)
    return EXIT_OK


def _cmd_profile_tau(args: argparse.Namespace) -> int:
    data = _load_data(args)
    rows = profile_tau(_model_spec(args), data, args.tau, _fit_options(args))
    if args.format == "json":
        _emit_models(rows, args.out)
    else:
        _emit_frame(pd.DataFrame([row.model_dump() for row in rows]), args.out)
    return EXIT_OK if not any(row.failed for row in rows) else EXIT_CONVERGENCE


def _cmd_dependence(args: argparse.Namespace) -> int:
    rows = dependence_grid(args.omegas, args.lambdas, DEFAULT_QUADRATURE)
    frame = pd.DataFrame([vars(row) for row in rows])
    _emit_frame(frame, args.out)
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    model = BivariateModel.from_blocks(
        lam=args.lam,
        omega=args.omega,
        block1=(args.gamma1, args.tau1, args.phi1),
        block2=(args.gamma2, args.tau2, args.phi2),
        family=MarginalFamily(args.family),
    )
    records = simulate_dataset(model, args.n, args.censor_rate, args.seed)
    _emit_frame(wide_frame(records), args.out)
    return EXIT_OK


def _cmd_km(args: argparse.Namespace) -> int:
    data = _load_data(args)
    frames = []
    for arm, times, flags in ((1, data.t1, data.d1), (2, data.t2, data.d2)):
        curve = kaplan_meier(times, flags)
        frames.append(pd.DataFrame({"arm": arm, "time": curve.times, "survival": curve.survival}))
    _emit_frame(pd.concat(frames, ignore_index=True), args.out)
    return EXIT_OK


def _cmd_verify_frailty(args: argparse.Namespace) -> int:
    if args.check == "result1":
        report = verify_result1(args.gamma, args.kappa, args.omega, args.lam, args.n, args.seed, args.mixing)
    elif args.check == "apgw":
        report = verify_resultA1(args.gamma, args.kappa, args.omega, args.n, args.seed)
    else:
        report = verify_weibull_extension_link(args.gamma, args.n, args.seed)
    _emit(TypeAdapter(FrailtyCheckReport).dump_json(report, indent=2).decode("utf-8"), args.out)
    return EXIT_OK


def _cmd_curves(args: argparse.Namespace) -> int:
    data = _load_data(args)
    result = fit(_model_spec(args), data, _fit_options(args))
    grid = None
    if args.grid_max is not None:
        grid = [args.grid_max * i / (args.grid_points - 1) for i in range(args.grid_points)]
    _emit_frame(export_fitted_curves(result, data, grid), args.out)
    return EXIT_OK


# -----------------------------------------------------------------------------
# Parser
# -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    common.add_argument("--seed", type=int, default=None, help="Seed for every random draw.")
    common.add_argument("--out", type=Path, default=None, help="Write output here instead of stdout.")

    parser = argparse.ArgumentParser(
        prog="bivariate_pgw",
        description="Bivariate PGW/APGW survival models with a tempered-stable frailty copula.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit_parser = sub.add_parser("fit", parents=[common], help="Fit one model and print a JSON fit report.")
    _add_data_arguments(fit_parser)
    _add_model_arguments(fit_parser)
    _add_fit_arguments(fit_parser)
    fit_parser.add_argument(
        "--derived",
        action="store_true",
        help="Add Kendall's tau, phi2/phi1 and common-tau intervals to the report.",
    )
    fit_parser.set_defaults(handler=_cmd_fit)

    compare_parser = sub.add_parser("compare", parents=[common], help="Fit several models and tabulate AIC/BIC.")
    _add_data_arguments(compare_parser)
    _add_fit_arguments(compare_parser)
    compare_parser.add_argument("--models", nargs="+", default=TREATMENT_MODELS, help="Presets or JSON files.")
    compare_parser.add_argument("--format", choices=["csv", "json"], default="csv")
    compare_parser.set_defaults(handler=_cmd_compare)

    profile_parser = sub.add_parser("profile-tau", parents=[common], help="Refit with the common tau held at each value.")
    _add_data_arguments(profile_parser)
    _add_model_arguments(profile_parser, default="model7")
    _add_fit_arguments(profile_parser)
    profile_parser.add_argument(
        "--tau",
        nargs="+",
        type=_float,
        default=[0.0, 0.07, 0.15, 0.57, 1.0, 1.23, 1.72, math.inf],
        help="Tau values in (-1, inf]; 'inf' is accepted.",
    )
    profile_parser.add_argument("--format", choices=["csv", "json"], default="csv")
    profile_parser.set_defaults(handler=_cmd_profile_tau)

    dependence_parser = sub.add_parser("dependence", parents=[common], help="Kendall's tau, Spearman's rho and the rho bound on a grid.")
    dependence_parser.add_argument("--omegas", nargs="+", type=_float, default=[0.2, 0.4, 0.6, 0.8, 0.95])
    dependence_parser.add_argument("--lambdas", nargs="+", type=_float, default=[1e-8, 0.01, 0.1, 1.0, 10.0])
    dependence_parser.set_defaults(handler=_cmd_dependence)

    simulate_parser = sub.add_parser("simulate", parents=[common], help="Simulate paired lifetimes as a wide CSV.")
    simulate_parser.add_argument("--n", type=int, required=True)
    simulate_parser.add_argument("--censor-rate", type=float, default=0.0)
    simulate_parser.add_argument("--lam", type=float, required=True)
    simulate_parser.add_argument("--omega", type=float, required=True)
    for margin in ("1", "2"):
        simulate_parser.add_argument(f"--gamma{margin}", type=float, required=True)
        simulate_parser.add_argument(f"--tau{margin}", type=_float, required=True)
        simulate_parser.add_argument(f"--phi{margin}", type=float, default=1.0)
    simulate_parser.add_argument("--family", choices=[f.value for f in MarginalFamily], default=MarginalFamily.APGW.value)
    simulate_parser.set_defaults(handler=_cmd_simulate)

    km_parser = sub.add_parser("km", parents=[common], help="Kaplan-Meier table for both members.")
    _add_data_arguments(km_parser)
    km_parser.set_defaults(handler=_cmd_km)

    verify_parser = sub.add_parser("verify-frailty", parents=[common], help="Monte-Carlo check of the frailty mixing results.")
    verify_parser.add_argument("--check", choices=["result1", "apgw", "weibull-extension"], default="result1")
    verify_parser.add_argument("--mixing", choices=["tempered_stable", "inverse_gaussian", "gamma"], default="tempered_stable")
    verify_parser.add_argument("--gamma", type=float, default=1.5)
    verify_parser.add_argument("--kappa", type=float, default=2.0)
    verify_parser.add_argument("--omega", type=float, default=0.5)
    verify_parser.add_argument("--lam", type=float, default=1.0)
    verify_parser.add_argument("--n", type=int, default=100_000)
    verify_parser.set_defaults(handler=_cmd_verify_frailty)

    curves_parser = sub.add_parser("curves", parents=[common], help="Fit a model and export model and Kaplan-Meier curves.")
    _add_data_arguments(curves_parser)
    _add_model_arguments(curves_parser)
    _add_fit_arguments(curves_parser)
    curves_parser.add_argument("--grid-max", type=float, default=None, help="Last grid time (default: largest time).")
    curves_parser.add_argument("--grid-points", type=int, default=101)
    curves_parser.set_defaults(handler=_cmd_curves)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else default_log_level())

    try:
        return args.handler(args)
    except (InputError, DomainError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except (OptimizationError, ConvergenceError) as exc:
        logger.error("%s", exc)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
