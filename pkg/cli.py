import argparse
import csv
import json
import logging
import os
import sys
from collections.abc import Iterator

from dotenv import load_dotenv

from bench import fit_report, random_corpus, run_config, write_csv
from bitfield import DEFAULT_MAX_WIDTH_BITS
from cnf import (
    canonicalize,
    natural_key,
    parse_formula,
    resolve_explicit_order,
    variable_order,
)
from data_models import (
    Assignment,
    BenchConfig,
    Decision,
    Dialect,
    Formula,
    Mode,
    OrderKind,
    OrderScheme,
    OutputFormat,
    Policy,
    SolveOptions,
    SolveReport,
    VerifyConfig,
)
from errors import InsufficientDataError, MaskSatError, UsageError
from maskset import decide, extract_models, render_tables
from oracle import DEFAULT_BRUTE_FORCE_MAX_VARS, cross_check, evaluate
from utils import (
    configure_logging,
    deserialize_data_model,
    env_int,
    find_config_file,
    generate_bench_output_path,
    list_corpus,
    read_input,
    serialize_data_model,
)

load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SAT = 10
EXIT_UNSAT = 20

REPORT_COLUMNS = (
    "decision",
    "mode",
    "var_count",
    "clause_count",
    "halted_at_clause",
    "masks_built",
    "clauses_processed",
    "bit_ops",
    "words_touched",
    "peak_field_bytes",
    "wall_time_ns",
)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 like every other failure."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def parse_order(text: str) -> tuple[OrderKind, tuple[str, ...]]:
    match text.split(":", 1):
        case ["first"]:
            return OrderKind.FIRST, ()
        case ["sorted"]:
            return OrderKind.SORTED, ()
        case ["explicit", names] if names.strip():
            return OrderKind.EXPLICIT, tuple(name.strip() for name in names.split(","))
        case _:
            raise argparse.ArgumentTypeError(
                f"invalid order {text!r}, expected first, sorted or explicit:<name,...>"
            )


def parse_v_range(text: str) -> tuple[int, int]:
    low, sep, high = text.partition("..")
    try:
        bounds = (int(low), int(high)) if sep else (int(low), int(low))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid v range {text!r}, expected A..B") from None
    if bounds[0] < 1 or bounds[0] > bounds[1]:
        raise argparse.ArgumentTypeError(f"invalid v range {text!r}")
    return bounds


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", type=Mode, choices=list(Mode), default=None)
    common.add_argument("--order", type=parse_order, default=(OrderKind.FIRST, ()))
    common.add_argument("--policy", type=Policy, choices=list(Policy), default=Policy.LENIENT)
    common.add_argument("--max-width-bits", type=int, default=None)
    common.add_argument(
        "--format", type=OutputFormat, choices=list(OutputFormat), default=OutputFormat.TEXT
    )
    common.add_argument("--retain", action="store_true", help="keep the final bit field")
    common.add_argument("--skip-absent", action="store_true")
    common.add_argument("--parallel", action="store_true", help="build masks in threads")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--log-level", default=None)

    parser = _Parser(prog="masksat", description="Clause-mask CNF satisfiability")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="decide satisfiability")
    solve.add_argument("input", help="DIMACS or inline CNF file, '-' for stdin")

    model = commands.add_parser("model", parents=[common], help="print satisfying assignments")
    model.add_argument("input")
    model.add_argument("--limit", type=int, default=1)

    masks = commands.add_parser("masks", parents=[common], help="print clause mask tables")
    masks.add_argument("--v", type=int, default=3, dest="v")

    verify = commands.add_parser("verify", parents=[common], help="cross-check against oracles")
    verify.add_argument("input", nargs="?", help="single instance to check")
    verify.add_argument("--corpus", help="directory of *.cnf files")
    verify.add_argument("--config", help="VerifyConfig JSON file or directory")
    verify.add_argument("--count", type=int)
    verify.add_argument("--v", type=parse_v_range, dest="v_range")
    verify.add_argument("--seed", type=int)

    bench = commands.add_parser("bench", parents=[common], help="measure scaling as CSV")
    bench.add_argument("--config", help="BenchConfig JSON file or directory")
    bench.add_argument("--v", type=parse_v_range, dest="v_range")
    bench.add_argument("--ratio", type=float)
    bench.add_argument("--k", type=int)
    bench.add_argument("--reps", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--fit", action="store_true", help="print the fit verdict to stderr")
    bench.add_argument("--save-fit", help="write the full fit report as JSON")
    bench.add_argument("--dump-dir")
    bench.add_argument("--output", help="CSV file, or directory for a timestamped file")

    return parser


def max_width_bits(args: argparse.Namespace) -> int:
    if args.max_width_bits is not None:
        return args.max_width_bits
    return env_int("MASKSAT_MAX_WIDTH_BITS", DEFAULT_MAX_WIDTH_BITS)


def solve_options(args: argparse.Namespace, retain: bool = False) -> SolveOptions:
    options = {
        "mode": args.mode or Mode.BLOCK,
        "retain_field": retain or args.retain,
        "skip_absent": args.skip_absent,
        "parallel": args.parallel,
        "max_width_bits": max_width_bits(args),
    }
    if args.workers is not None:
        options["workers"] = args.workers
    return SolveOptions(**options)


def prepare_formula(args: argparse.Namespace, data: bytes, source: str) -> Formula:
    formula = canonicalize(parse_formula(data, source), args.policy)
    kind, names = args.order
    match kind:
        case OrderKind.EXPLICIT:
            scheme = resolve_explicit_order(formula, names)
        case _:
            scheme = OrderScheme(kind=kind)
    return variable_order(formula, scheme)


def format_model(formula: Formula, assignment: Assignment) -> str:
    order = sorted(range(formula.var_count), key=lambda var: natural_key(formula.names[var]))
    match formula.dialect:
        case Dialect.DIMACS:
            literals = [
                formula.names[var] if assignment.values[var] else f"-{formula.names[var]}"
                for var in order
            ]
            return " ".join(["v", *literals, "0"])
        case _:
            return " ".join(
                f"{formula.names[var]}={int(assignment.values[var])}" for var in order
            )


def print_report(report: SolveReport, output_format: OutputFormat) -> None:
    counters = report.op_counters
    match output_format:
        case OutputFormat.JSON:
            print(report.model_dump_json(indent=2))
        case OutputFormat.CSV:
            writer = csv.writer(sys.stdout, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            writer.writerow(
                [
                    report.decision.value,
                    report.mode.value,
                    report.var_count,
                    report.clause_count,
                    "" if report.halted_at_clause is None else report.halted_at_clause,
                    counters.masks_built,
                    counters.clauses_processed,
                    counters.bit_ops,
                    counters.words_touched,
                    report.peak_field_bytes,
                    report.wall_time_ns,
                ]
            )
        case _:
            print(report.decision.value)
            print(
                f"c variables={report.var_count} clauses={report.clause_count} "
                f"mode={report.mode.value}"
            )
            print(
                f"c masks_built={counters.masks_built} "
                f"clauses_processed={counters.clauses_processed} "
                f"bit_ops={counters.bit_ops} words_touched={counters.words_touched}"
            )
            print(
                f"c peak_field_bytes={report.peak_field_bytes} "
                f"wall_time_ns={report.wall_time_ns}"
            )
            if report.halted_at_clause is not None:
                print(f"c halted_at_clause={report.halted_at_clause}")
            if report.final_field is not None:
                print(f"c final_field={report.final_field.to_hex()}")


def cmd_solve(args: argparse.Namespace) -> int:
    data, source = read_input(args.input)
    formula = prepare_formula(args, data, source)
    report = decide(formula, solve_options(args))
    print_report(report, args.format)
    return EXIT_SAT if report.decision == Decision.SATISFIABLE else EXIT_UNSAT


def cmd_model(args: argparse.Namespace) -> int:
    if args.limit < 1:
        raise UsageError(f"--limit must be at least 1, got {args.limit}")
    data, source = read_input(args.input)
    formula = prepare_formula(args, data, source)
    report = decide(formula, solve_options(args, retain=True))
    if report.decision == Decision.UNSATISFIABLE:
        if args.format == OutputFormat.JSON:
            print(json.dumps({"decision": report.decision.value, "models": []}))
        else:
            print(report.decision.value)
        return EXIT_UNSAT

    models = extract_models(report, formula, args.limit)
    for assignment in models:
        if not evaluate(formula, assignment):
            raise RuntimeError(f"Extracted model k={assignment.index} fails evaluation")

    if args.format == OutputFormat.JSON:
        names = formula.names
        payload = {
            "decision": report.decision.value,
            "models": [
                {names[var]: int(value) for var, value in enumerate(assignment.values)}
                for assignment in models
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        print(report.decision.value)
        for assignment in models:
            print(format_model(formula, assignment))
    return EXIT_SAT


def cmd_masks(args: argparse.Namespace) -> int:
    print(render_tables(args.v), end="")
    return EXIT_OK


def _config_path(path: str, pattern: str) -> str:
    if os.path.isdir(path):
        return find_config_file(path, pattern)
    return path


def _corpus_formulas(args: argparse.Namespace, paths: list[str]) -> Iterator[tuple[str, Formula]]:
    for path in paths:
        data, source = read_input(path)
        yield source, prepare_formula(args, data, source)


def cmd_verify(args: argparse.Namespace) -> int:
    if args.config:
        config = deserialize_data_model(_config_path(args.config, "verify_*.json"), VerifyConfig)
    else:
        config = VerifyConfig(
            brute_force_max_vars=env_int(
                "MASKSAT_BRUTE_FORCE_MAX_VARS", DEFAULT_BRUTE_FORCE_MAX_VARS
            )
        )
    overrides = {}
    if args.count is not None:
        overrides["count"] = args.count
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.v_range is not None:
        overrides["v_min"], overrides["v_max"] = args.v_range
    config = VerifyConfig.model_validate({**config.model_dump(), **overrides})

    if args.corpus:
        formulas = _corpus_formulas(args, list_corpus(args.corpus))
    elif args.input:
        formulas = _corpus_formulas(args, [args.input])
    else:
        formulas = random_corpus(config)

    summary = cross_check(formulas, solve_options(args), config.brute_force_max_vars)

    if args.format == OutputFormat.JSON:
        print(summary.model_dump_json(indent=2))
    else:
        print(f"instances: {summary.instances}")
        print(f"agreements: {summary.agreements}")
        print(f"disagreements: {summary.disagreements}")
        print(f"witness_failures: {summary.witness_failures}")
        print(f"satisfiable: {summary.satisfiable}")
        print(f"brute_force_checked: {summary.brute_force_checked}")

    if summary.disagreements or summary.witness_failures:
        for name in summary.disagreeing_instances:
            print(f"error: solvers disagree on {name}", file=sys.stderr)
        print(
            f"error: {summary.disagreements} disagreements, "
            f"{summary.witness_failures} witness failures",
            file=sys.stderr,
        )
        return EXIT_ERROR
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.config:
        config = deserialize_data_model(_config_path(args.config, "bench_*.json"), BenchConfig)
    else:
        config = BenchConfig(max_width_bits=max_width_bits(args))

    overrides = {
        key: value
        for key, value in (
            ("mode", args.mode),
            ("ratio", args.ratio),
            ("k", args.k),
            ("reps", args.reps),
            ("seed", args.seed),
            ("workers", args.workers),
            ("max_width_bits", args.max_width_bits),
            ("dump_dir", args.dump_dir),
        )
        if value is not None
    }
    if args.v_range is not None:
        overrides["v_min"], overrides["v_max"] = args.v_range
    config = BenchConfig.model_validate({**config.model_dump(), **overrides})

    records = run_config(config)

    if args.output:
        output_path = args.output
        if os.path.isdir(output_path):
            output_path = generate_bench_output_path(config.name, config.mode, output_path)
        with open(output_path, "w", encoding="utf-8", newline="") as f:
            count = write_csv(records, f)
        logger.info("Wrote %d rows to %s", count, output_path)
    else:
        write_csv(records, sys.stdout)

    if args.fit or args.save_fit:
        try:
            report = fit_report(records)
        except InsufficientDataError as e:
            logger.warning("Skipping the fit: %s", e)
            return EXIT_OK
        if args.fit:
            print(report.verdict, file=sys.stderr)
        if args.save_fit:
            serialize_data_model(args.save_fit, report)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        match args.command:
            case "solve":
                return cmd_solve(args)
            case "model":
                return cmd_model(args)
            case "masks":
                return cmd_masks(args)
            case "verify":
                return cmd_verify(args)
            case "bench":
                return cmd_bench(args)
            case _:
                raise UsageError(f"unknown command {args.command!r}")
    except (MaskSatError, ValueError, OSError, MemoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
