"""Command-line front end: ``sievelab <command> ...``.

Every command builds a pandas DataFrame and prints it to stdout in the chosen format; logs
go to stderr through the INI logging config. Exit codes come from the exception raised
(see ``sievelab.core.errors``), 4 when a verification suite has failures.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from sievelab import __version__
from sievelab.core.config import Settings
from sievelab.core.errors import VERIFICATION_FAILED, AmbiguityError, DomainError, SieveLabError
from sievelab.core.logging_setup import configure_logging
from sievelab.services import buchstab, divisor_comb, loss_integrals, verification
from sievelab.services.catalog import Catalog, load_catalog
from sievelab.services.loss_integrals import QuadratureResult
from sievelab.services.sieve_params import ThetaParams, classify, type_ii_range

logger = logging.getLogger("sievelab.cli")

FORMATS = ("plain", "markdown", "csv", "csv-full")
REFERENCE = verification.REFERENCE
DERIVED = verification.DERIVED
DIGITS = 6


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ThetaParams | None
    tol: float | None
    seed: int | None
    output_format: str = "plain"
    catalog_path: Path | None = None
    epsilon_override: float | None = None
    budget: int | None = None
    atol: float | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.tol is not None and self.tol <= 0:
            raise DomainError(f"--tol must be positive, got {self.tol}")
        if self.output_format not in FORMATS:
            raise DomainError(f"unknown format {self.output_format!r}")

    def settings(self) -> Settings:
        overrides = {
            "catalog": self.catalog_path,
            "epsilon": self.epsilon_override,
            "seed": self.seed,
            "rtol": self.tol,
            "atol": self.atol,
            "budget": self.budget,
            "workers": self.workers,
        }
        return Settings(**{k: v for k, v in overrides.items() if v is not None})


# --------------------------------------------------------------------------- #
# Output
# --------------------------------------------------------------------------- #
def _short(value):
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{DIGITS}g}"
    return value


def render(frame: pd.DataFrame, output_format: str) -> str:
    if output_format != "csv-full":
        frame = frame.map(_short)
    if output_format in ("csv", "csv-full"):
        return frame.to_csv(index=False, lineterminator="\n")
    if output_format == "markdown":
        return frame.to_markdown(index=False) + "\n"
    if frame.empty:
        return "  ".join(frame.columns) + "\n"
    return frame.to_string(index=False) + "\n"


def _result_frame(result: QuadratureResult) -> pd.DataFrame:
    flags = [
        name
        for name, on in (
            ("empty", result.empty),
            ("zero_hits", result.zero_hits),
            ("budget_exhausted", result.budget_exhausted),
        )
        if on
    ]
    rows = [
        {
            "name": result.name,
            "value": result.value,
            "est_error": result.est_error,
            "samples": result.samples,
            "strata": result.strata,
            "seed": result.seed,
            "flags": ",".join(flags),
            "provenance": DERIVED,
        }
    ]
    for label, value in result.variants.items():
        rows.append(
            {
                "name": label,
                "value": value,
                "est_error": "",
                "samples": "",
                "strata": "",
                "seed": "",
                "flags": "variant",
                "provenance": DERIVED,
            }
        )
    return pd.DataFrame(rows)


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #
def cmd_buchstab(start: float, stop: float, step: float, settings: Settings) -> pd.DataFrame:
    """(u, omega_0, omega, omega_1) on start, start + step, ... <= stop; empty when start > stop."""
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    columns = ["u", "omega_lower", "omega", "omega_upper", "provenance"]
    if start > stop:
        return pd.DataFrame(columns=columns)
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    u = start + step * np.arange(count)
    table = buchstab.get_table(settings.grid_step, settings.u_max)
    return pd.DataFrame(
        {
            "u": u,
            "omega_lower": buchstab.omega_lower(u),
            "omega": table.omega(u),
            "omega_upper": buchstab.omega_upper(u),
            "provenance": DERIVED,
        },
        columns=columns,
    )


def cmd_typeii(params: ThetaParams, family: str, catalog: Catalog) -> pd.DataFrame:
    report = type_ii_range(params, family=family, source=catalog)
    rows = [
        ("point", params.label(), REFERENCE),
        ("region", report.matched_region, REFERENCE),
    ]
    if report.message:
        rows.append(("message", report.message, REFERENCE))
    else:
        for piece in report.raw_ranges:
            rows.append((f"range[{piece.provenance}]", piece.render(params.scope()), REFERENCE))
        rows.append(("merged", report.merged.render(params), DERIVED))
        if report.printed is not None:
            rows.append(("printed", report.printed.render(params), REFERENCE))
        if report.kappa_start is not None:
            rows.append(("kappa_start", report.kappa_start, report.kappa_provenance))
        if report.decomposition:
            rows.append(("decomposition", report.decomposition, REFERENCE))
        if report.note:
            rows.append(("note", report.note, REFERENCE))
    return pd.DataFrame(rows, columns=["field", "value", "provenance"])


def cmd_verify(suite: str, settings: Settings) -> tuple[pd.DataFrame, bool]:
    results = verification.run_suite(suite, settings)
    frame = pd.DataFrame(
        [
            {
                "suite": r.suite,
                "check": r.name,
                "status": "PASS" if r.passed else "FAIL",
                "value": r.value,
                "expected": r.expected,
                "provenance": r.provenance,
            }
            for r in results
        ],
        columns=["suite", "check", "status", "value", "expected", "provenance"],
    )
    return frame, all(r.passed for r in results)


def cmd_integral(
    name: str,
    params: ThetaParams | float,
    settings: Settings,
    catalog: Catalog,
    omega: str | None = None,
    atol: float | None = None,
) -> pd.DataFrame:
    record = catalog.integral(name)
    if atol is None and record.arity == "pair":
        atol = settings.escalated_atol
    result = loss_integrals.named_integral(
        name, params, catalog=catalog, omega=omega, atol=atol, settings=settings
    )
    return _result_frame(result)


def cmd_l7(kappa: float, settings: Settings, catalog: Catalog) -> pd.DataFrame:
    result = loss_integrals.eval_L7(kappa, catalog=catalog, settings=settings)
    return _result_frame(result)


def cmd_params(params: ThetaParams) -> pd.DataFrame:
    derived = params.derived()
    rows = [("theta", params.theta, REFERENCE)]
    rows += [(name, value, REFERENCE) for name, value in derived.items()]
    return pd.DataFrame(rows, columns=["parameter", "value", "provenance"])


def cmd_classify(params: ThetaParams, group: str, catalog: Catalog) -> pd.DataFrame:
    names = classify(params, group, source=catalog)
    return pd.DataFrame(
        [(name, catalog.region(name).description, REFERENCE) for name in names],
        columns=["region", "description", "provenance"],
    )


def cmd_divisor(alphas: Sequence[str], normalize: bool = False) -> pd.DataFrame:
    pattern = divisor_comb.FactorizationPattern.of([float(a) for a in alphas], normalize=normalize)
    rows = [
        ("k", pattern.k, DERIVED),
        ("mobius_half_sum", divisor_comb.mobius_half_sum(pattern), DERIVED),
        ("mobius_full_sum", divisor_comb.mobius_full_sum(pattern), DERIVED),
        ("omega3_midrange_count", divisor_comb.omega3_midrange_count(pattern), DERIVED),
    ]
    case = divisor_comb.mobius_case_table(pattern)
    if case is not None:
        rows.append(("case_table", case, REFERENCE))
    if pattern.k == 5:
        rows.append(("midrange_gap", divisor_comb.midrange_gap(pattern), DERIVED))
        rows.append(("midrange_gap_bound", divisor_comb.midrange_gap_bound(pattern), REFERENCE))
    if pattern.k == 6:
        exact = alphas if not normalize else pattern.alphas
        for triple in itertools.combinations(range(1, 7), 3):
            if divisor_comb.trivially_impossible(triple):
                verdict = "impossible"
            else:
                verdict = "counted" if divisor_comb.triple_verdict(triple, exact) else "not counted"
            rows.append((f"triple{triple}", verdict, DERIVED))
    return pd.DataFrame(rows, columns=["quantity", "value", "provenance"])


def cmd_regions(catalog: Catalog, group: str | None = None) -> pd.DataFrame:
    specs = [r for r in catalog.spec.regions if group is None or r.group == group]
    return pd.DataFrame(
        [
            (r.name, r.group, "k" if r.dimension is None else r.dimension, r.description, REFERENCE)
            for r in specs
        ],
        columns=["region", "group", "dimension", "description", "provenance"],
    )


# --------------------------------------------------------------------------- #
# Parser
# --------------------------------------------------------------------------- #
def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--theta", type=float, help="single modulus exponent")
    common.add_argument("--theta1", type=float)
    common.add_argument("--theta2", type=float)
    common.add_argument("--theta3", type=float)
    common.add_argument("--epsilon", type=float, help="override SIEVELAB_EPSILON")
    common.add_argument("--tol", type=float, help="relative tolerance for integrals")
    common.add_argument("--atol", type=float, help="absolute tolerance for integrals")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="quadrature seed (default 0x5EED)")
    common.add_argument("--budget", type=int, help="samples per integral")
    common.add_argument("--workers", type=int, help="threads for stratum evaluation")
    common.add_argument("--format", choices=FORMATS, default="plain", dest="output_format")
    common.add_argument("--catalog", type=Path, help="catalog JSON (default SIEVELAB_CATALOG)")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="sievelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("buchstab", parents=[common], help="omega and its bounds on a u-grid")
    p.add_argument("start", type=float)
    p.add_argument("stop", type=float)
    p.add_argument("step", type=float)

    p = sub.add_parser("typeii", parents=[common], help="Type-II range at a parameter point")
    p.add_argument("point", type=float, nargs="*", help="theta, or theta1 theta2 [theta3]")
    p.add_argument("--family", choices=("A", "E"), default="A")

    p = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    p.add_argument("suite", choices=[*verification.SUITES, "all"])

    p = sub.add_parser("integral", parents=[common], help="named loss integral")
    p.add_argument("name")
    p.add_argument("point", type=float, nargs="*")
    p.add_argument("--omega", choices=("exact", "lower", "upper"))

    p = sub.add_parser("l7", parents=[common], help="L7(kappa)")
    p.add_argument("kappa", type=float)

    p = sub.add_parser("params", parents=[common], help="kappa, tau, nu and primes at theta")
    p.add_argument("point", type=float, nargs="*")

    p = sub.add_parser("classify", parents=[common], help="regions containing (theta1, theta2)")
    p.add_argument("point", type=float, nargs="*")
    p.add_argument("--group", default="master")

    p = sub.add_parser("divisor", parents=[common], help="divisor sums of a factorization pattern")
    p.add_argument("alphas", nargs="+", help="exponents, largest first")
    p.add_argument("--normalize", action="store_true", help="rescale exponents to sum 1")

    p = sub.add_parser("regions", parents=[common], help="list catalog regions")
    p.add_argument("--group")
    return parser


def _theta_params(args: argparse.Namespace, epsilon: float) -> ThetaParams | None:
    point = list(getattr(args, "point", None) or [])
    flags = [args.theta1, args.theta2, args.theta3]
    if any(f is not None for f in flags):
        point = [f for f in flags if f is not None]
    elif args.theta is not None:
        point = [args.theta]
    if not point:
        return None
    return ThetaParams(tuple(point), epsilon)


def _require(params: ThetaParams | None, command: str) -> ThetaParams:
    if params is None:
        raise DomainError(f"{command} needs a parameter point (positional or --theta...)")
    return params


def _integral_point(
    args: argparse.Namespace, params: ThetaParams | None, catalog: Catalog
) -> ThetaParams | float:
    # L7 pieces are indexed by kappa itself
    if catalog.integral(args.name).arity == "kappa":
        if len(args.point) != 1:
            raise DomainError(f"{args.name} takes a single kappa, got {args.point}")
        return args.point[0]
    return _require(params, "integral")


def run(args: argparse.Namespace) -> int:
    settings = RunConfig(
        command=args.command,
        params=None,
        tol=args.tol,
        seed=args.seed,
        output_format=args.output_format,
        catalog_path=args.catalog,
        epsilon_override=args.epsilon,
        budget=args.budget,
        atol=args.atol,
        workers=args.workers,
    ).settings()
    configure_logging(settings.log_config, verbose=args.verbose)
    logger.debug("running %s with seed %#x", args.command, settings.seed)
    params = _theta_params(args, settings.epsilon)
    status = 0

    if args.command == "buchstab":
        frame = cmd_buchstab(args.start, args.stop, args.step, settings)
    elif args.command == "verify":
        frame, passed = cmd_verify(args.suite, settings)
        status = 0 if passed else VERIFICATION_FAILED
    elif args.command == "params":
        frame = cmd_params(_require(params, "params"))
    elif args.command == "divisor":
        frame = cmd_divisor(args.alphas, args.normalize)
    else:
        catalog = load_catalog(settings.catalog)
        if args.command == "typeii":
            frame = cmd_typeii(_require(params, "typeii"), args.family, catalog)
        elif args.command == "integral":
            target = _integral_point(args, params, catalog)
            frame = cmd_integral(args.name, target, settings, catalog, args.omega, args.atol)
        elif args.command == "l7":
            frame = cmd_l7(args.kappa, settings, catalog)
        elif args.command == "classify":
            frame = cmd_classify(_require(params, "classify"), args.group, catalog)
        else:
            frame = cmd_regions(catalog, args.group)

    sys.stdout.write(render(frame, args.output_format))
    return status


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except AmbiguityError as exc:
        print(f"ambiguous: {exc}", file=sys.stderr)
        for name in exc.matches:
            print(f"  {name}", file=sys.stderr)
        return exc.exit_code
    except SieveLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
