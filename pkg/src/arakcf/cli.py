"""Command-line front end: ``arakcf <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 a cap was exceeded, 4 a
constant-free identity failed during ``verify``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import harness
from .calibration import load_calibration, save_calibration
from .charfn import esseen_integral, lattice_masses, q_of_H
from .concentration import concentration, exact_sum_distribution
from .errors import ArakError, CapExceeded, InvalidInput, QuadratureError
from .measures import (
    CoefficientVector,
    CompoundPoissonSpec,
    DiscreteDistribution,
    SpectralMeasure,
    decode_number,
)
from .progressions import SCHEMA as PROGRESSION_SCHEMA
from .structure import (
    StructureConfig,
    beta_exact_r1,
    beta_upper,
    fit_progression_1d,
    inverse_detect,
    k1_structure_report,
)

EXIT_OK, EXIT_INVALID, EXIT_CAP, EXIT_IDENTITY = 0, 2, 3, 4
THREADS_ENV = "ARAKCF_THREADS"
ATOM_CAP = StructureConfig().support_cap


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


# --------------------------------------------------------------------------
# argument decoding


def number(text: str):
    """'3' -> int, '1/3' -> Fraction, '0.25' -> float."""
    text = text.strip()
    try:
        if "/" in text:
            return Fraction(text)
        if text.lstrip("+-").isdigit():
            return int(text)
        val = float(text)
    except (ValueError, ZeroDivisionError) as err:
        raise InvalidInput(f"not a number: {text!r}") from err
    return val


def load_json(text: str):
    """Inline JSON, ``@path``, ``-`` for stdin, or a path to a JSON file."""
    if text == "-":
        raw = sys.stdin.read()
    elif text.startswith("@"):
        raw = Path(text[1:]).read_text()
    elif text.lstrip()[:1] in "[{" or text.strip() in ("true", "false", "null"):
        raw = text
    elif Path(text).is_file():
        raw = Path(text).read_text()
    else:
        raw = text
    try:
        return json.loads(raw, parse_constant=_reject_constant)
    except json.JSONDecodeError as err:
        raise InvalidInput(f"invalid JSON: {err}") from err


def _reject_constant(name):
    raise InvalidInput(f"non-standard JSON constant {name}")


def _scalar(v):
    if isinstance(v, str):
        return number(v) if v not in ("inf", "-inf") else decode_number(v)
    return decode_number(v)


def coefficients(obj) -> CoefficientVector:
    if isinstance(obj, dict):
        return CoefficientVector.from_json(obj)
    if not isinstance(obj, list):
        raise InvalidInput("coefficients must be a JSON list or a CoefficientVector object")
    return CoefficientVector.of([tuple(_scalar(c) for c in e) if isinstance(e, list) else _scalar(e) for e in obj])


def law(text: str) -> DiscreteDistribution:
    """'rademacher', 'lazy:<p>', 'uniform:[..]', or a DiscreteDistribution as JSON."""
    if text == "rademacher":
        return DiscreteDistribution.rademacher()
    if text.startswith("lazy:"):
        return DiscreteDistribution.lazy_rademacher(number(text[5:]))
    if text.startswith("uniform:"):
        return DiscreteDistribution.uniform([_scalar(v) for v in load_json(text[8:])])
    obj = load_json(text)
    if isinstance(obj, dict):
        return DiscreteDistribution.from_json(obj)
    return DiscreteDistribution(_atoms(obj))


def measure(obj) -> SpectralMeasure:
    if isinstance(obj, dict):
        return SpectralMeasure.from_json(obj)
    return SpectralMeasure(_atoms(obj))


def _atoms(rows):
    """[[x_1, ..., x_d, w], ...] -> [((x_1, ..., x_d), w), ...]"""
    if not isinstance(rows, list) or not all(isinstance(r, list) and len(r) >= 2 for r in rows):
        raise InvalidInput("atoms must be rows [x_1, ..., x_d, weight]")
    return [(tuple(_scalar(c) for c in r[:-1]), _scalar(r[-1])) for r in rows]


def per_coordinate(text: str, d: int) -> list:
    obj = load_json(text) if text.lstrip()[:1] == "[" else text
    vals = [_scalar(v) for v in obj] if isinstance(obj, list) else [number(obj)] * d
    if len(vals) != d:
        raise InvalidInput(f"need {d} values, got {len(vals)}")
    return vals


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# output


def emit(args, obj) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _structure_config(args) -> StructureConfig:
    base = StructureConfig.from_json(load_json(args.config)).to_json() if args.config else StructureConfig().to_json()
    base.pop("schema")
    base.pop("type")
    if args.volume_cap is not None:
        base["m_cap"] = args.volume_cap
    if args.atom_cap is not None:
        base["support_cap"] = args.atom_cap
    base["threads"] = args.threads
    return StructureConfig(**base)


# --------------------------------------------------------------------------
# subcommands


def cmd_concentration(args) -> int:
    a = coefficients(load_json(args.a))
    X = law(args.x)
    tau = number(args.tau)
    if not tau >= 0:
        raise InvalidInput("tau must be nonnegative")
    F = exact_sum_distribution(a, X, args.atom_cap or ATOM_CAP)
    emit(args, concentration(F, tau).to_json())
    return EXIT_OK


def cmd_detect(args) -> int:
    a = coefficients(load_json(args.a))
    X = law(args.x)
    config = _structure_config(args)
    if args.method == "k1":
        tau = per_coordinate(args.tau, a.d)
        delta = per_coordinate(args.delta if args.delta is not None else args.tau, a.d)
        rep = k1_structure_report(a, X, tau, delta, config)
    else:
        rep = inverse_detect(a, X, number(args.tau), number(args.rho), args.budget, config)
    emit(args, rep.to_json())
    return EXIT_OK


def cmd_fit(args) -> int:
    vals = load_json(args.values)
    if not isinstance(vals, list) or not vals:
        raise InvalidInput("values must be a nonempty JSON list")
    vals = [_scalar(v) for v in vals]
    K, out = fit_progression_1d(vals, number(args.tau), args.volume_cap or 125, args.budget)
    emit(args, {"schema": PROGRESSION_SCHEMA, "type": "FitResult", "progression": K.to_json(), "outliers": list(out)})
    return EXIT_OK


def cmd_beta(args) -> int:
    W = measure(load_json(args.w))
    tau = number(args.tau)
    if args.exact:
        if args.r != 1:
            raise InvalidInput("--exact is available for r = 1 only")
        res = beta_exact_r1(W, args.m, tau, shifted=not args.centered)
    else:
        res = beta_upper(W, args.r, args.m, tau, budget=args.budget or 20000, seed=args.seed, shifted=not args.centered)
    emit(args, res.to_json())
    return EXIT_OK


def cmd_hdist(args) -> int:
    a = coefficients(load_json(args.a))
    lam = number(args.lam)
    out = {"concentration": q_of_H(a, lam, number(args.kappa), z=float(number(args.z))).to_json()}
    if args.masses:
        spec = CompoundPoissonSpec.from_coefficients(a, lam, number(args.z))
        dist, err = lattice_masses(spec)
        out["masses"] = dist.to_json()
        out["mass_error"] = err
    emit(args, out)
    return EXIT_OK


def cmd_essen(args) -> int:
    tau = number(args.tau)
    if args.spec is not None:
        obj = CompoundPoissonSpec.from_json(load_json(args.spec))
    elif args.lam is not None:
        obj = CompoundPoissonSpec.from_coefficients(coefficients(load_json(args.a)), number(args.lam))
    else:
        obj = exact_sum_distribution(coefficients(load_json(args.a)), law(args.x), args.atom_cap or ATOM_CAP)
    emit(args, esseen_integral(obj, tau, tol=args.tol).to_json())
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config:
        config = harness.SuiteConfig.from_json(load_json(args.config))
    elif args.suite in harness.SUITES:
        config = harness.SUITES[args.suite]
    else:
        raise InvalidInput(f"unknown suite {args.suite!r}; choose from {sorted(harness.SUITES)}")
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.build_calibration:
        seeds = [int(s) for s in args.seeds.split(",")]
        save_calibration(harness.build_calibration(seeds, config, threads=args.threads), args.build_calibration)
        return EXIT_OK
    records = harness.run_suite(config, threads=args.threads)
    table = load_calibration(args.calibration) if args.calibration else None
    summary = harness.summarize(records, config, table)
    csv_text = harness.records_to_csv(records)
    if args.output:
        Path(args.output).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2, allow_nan=False) + "\n")
    return EXIT_IDENTITY if summary["constant_free_failures"] else EXIT_OK


def cmd_plant(args) -> int:
    steps = load_json(args.steps)
    if not isinstance(steps, list):
        raise InvalidInput("steps must be a JSON list of generators")
    steps = [[_scalar(c) for c in g] if isinstance(g, list) else _scalar(g) for g in steps]
    a = harness.planted_instance(args.rank, steps, args.volume, args.n, args.outliers, number(args.noise), args.seed)
    emit(args, a.to_json())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the result here instead of stdout")
    common.add_argument("--threads", type=int, default=default_threads(), help=f"thread cap (default ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--atom-cap", type=int, default=None, help="support cap for exact sum laws")
    common.add_argument("--volume-cap", type=int, default=None, help="progression volume cap")
    common.add_argument("--budget", type=int, default=0, help="outlier budget, or sampling budget for beta")

    p = _Parser(prog="arakcf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("concentration", parents=[common], help="Q(F_a, tau) for a weighted sum")
    s.add_argument("--a", required=True, help="coefficients (JSON list, object, or path)")
    s.add_argument("--x", default="rademacher", help="law of X: rademacher, lazy:<p>, uniform:[..] or JSON")
    s.add_argument("--tau", required=True)
    s.set_defaults(func=cmd_concentration)

    s = sub.add_parser("detect", parents=[common], help="structure report for a coefficient vector")
    s.add_argument("--a", required=True)
    s.add_argument("--x", default="rademacher")
    s.add_argument("--tau", required=True, help="scalar, or one value per coordinate for k1")
    s.add_argument("--rho", default="1")
    s.add_argument("--delta", default=None, help="k1 only: scalar or per-coordinate list (default tau)")
    s.add_argument("--method", choices=("inverse", "k1"), default="inverse")
    s.add_argument("--config", default=None, help="StructureConfig JSON")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("fit", parents=[common], help="rank-one progression fit with outliers")
    s.add_argument("--values", required=True)
    s.add_argument("--tau", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("beta", parents=[common], help="mass outside the best progression neighborhood")
    s.add_argument("--w", required=True, help="measure as JSON rows [x.., weight] or a SpectralMeasure object")
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--tau", default="0")
    s.add_argument("--exact", action="store_true", help="exact rank-one value")
    s.add_argument("--centered", action="store_true", help="progressions through the origin only")
    s.set_defaults(func=cmd_beta, seed=0)

    s = sub.add_parser("hdist", parents=[common], help="Q(H_z^lam, kappa) for the compound Poisson law")
    s.add_argument("--a", required=True)
    s.add_argument("--lam", default="1")
    s.add_argument("--kappa", required=True)
    s.add_argument("--z", default="1")
    s.add_argument("--masses", action="store_true", help="also print the lattice masses")
    s.set_defaults(func=cmd_hdist)

    s = sub.add_parser("essen", parents=[common], help="Esseen integral of a law")
    s.add_argument("--a", default=None)
    s.add_argument("--x", default="rademacher")
    s.add_argument("--lam", default=None, help="use H_1^lam over --a instead of the law of the sum")
    s.add_argument("--spec", default=None, help="CompoundPoissonSpec JSON")
    s.add_argument("--tau", required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_essen)

    s = sub.add_parser("verify", parents=[common], help="run an identity suite; CSV records to --output")
    s.add_argument("--suite", default="default")
    s.add_argument("--config", default=None, help="harness/v1 suite JSON")
    s.add_argument("--summary", default=None, help="write the JSON summary here")
    s.add_argument("--calibration", default=None, help="calibration table for the drift check")
    s.add_argument("--build-calibration", default=None, metavar="PATH", help="write a calibration table and exit")
    s.add_argument("--seeds", default="1,2,3,7,11")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("plant", parents=[common], help="planted progression instance")
    s.add_argument("--rank", type=int, required=True)
    s.add_argument("--steps", required=True, help="JSON list of generators")
    s.add_argument("--volume", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--outliers", type=int, default=0)
    s.add_argument("--noise", default="0")
    s.set_defaults(func=cmd_plant, seed=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    if args.threads < 1:
        print("arakcf: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (CapExceeded, QuadratureError) as err:
        print(f"arakcf: cap exceeded: {err}", file=sys.stderr)
        return EXIT_CAP
    except (ArakError, ValueError, TypeError, KeyError, OSError, ZeroDivisionError) as err:
        print(f"arakcf: invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
