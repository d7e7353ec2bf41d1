"""Clause-mask decision procedure.

Each clause is turned into a bit field over all 2^v assignments in which bit k
is set when the assignment decoded from k (bit j of k is the value of VarId j)
falsifies the clause. The formula is unsatisfiable exactly when the OR of all
clause masks is all ones. Masks are built one variable at a time starting from
the single-bit field 1: for VarId j, with p = 2^j, a positive literal leaves the
partial mask unchanged, a negated literal multiplies it by 2^p and an absent
variable multiplies it by 2^p + 1.
"""

import asyncio
import itertools
import logging
import time
from string import ascii_uppercase

from bitfield import (
    BitField,
    check_width,
    first_unset_word,
    or_accumulate,
    replicate_double,
    resize,
    shift_into_upper,
    tile,
)
from data_models import (
    Assignment,
    Clause,
    ClauseMask,
    Decision,
    Formula,
    Literal,
    Mode,
    OpCounters,
    SolveOptions,
    SolveReport,
    TableRow,
)
from errors import FormulaError, ReportError

logger = logging.getLogger(__name__)

MAX_TABLE_VARS = 5


def _signs(clause: Clause, v: int) -> dict[int, bool]:
    signs: dict[int, bool] = {}
    for literal in clause.literals:
        if not 0 <= literal.var < v:
            raise FormulaError(f"VarId {literal.var} out of range for {v} variables")
        # the first literal mentioning a variable decides, as in a scan that exits early
        signs.setdefault(literal.var, literal.negated)
    return signs


def _faithful_product(
    signs: dict[int, bool], v: int, counters: OpCounters | None
) -> tuple[int, int]:
    """Literal big-integer products; returns the clause value and peak operand bits."""
    base = 2
    clause_result = 1
    peak_bits = 1
    for var in range(v):
        match signs.get(var):
            case None:
                clause_result = clause_result * (base + 1)
            case True:
                clause_result = clause_result * base
            case False:
                pass
        if counters is not None:
            counters.charge(clause_result.bit_length() + base.bit_length())
        base = base**2
        peak_bits = max(peak_bits, base.bit_length(), clause_result.bit_length())
    return clause_result, peak_bits


def _block_mask(
    signs: dict[int, bool],
    v: int,
    options: SolveOptions,
    counters: OpCounters | None,
) -> BitField:
    check = options.check_contracts
    if options.skip_absent:
        if not signs:
            return BitField.ones(1 << v)
        low, high = min(signs), max(signs)
        # absent prefix: (2^1+1)(2^2+1)...(2^(2^(low-1))+1) is all ones of width 2^low
        field = BitField.ones(1 << low)
        variables = range(low, high + 1)
    else:
        field = BitField.from_bignat(1, 1)
        variables = range(v)

    for var in variables:
        p = 1 << var
        match signs.get(var):
            case None:
                field = replicate_double(field, p, counters, check)
            case True:
                field = shift_into_upper(field, p, counters, check)
            case False:
                field = resize(field, 2 * p, counters)

    if field.width < (1 << v):
        field = tile(field, 1 << v, counters)
    return field


def build_clause_mask(
    clause: Clause,
    v: int,
    mode: Mode = Mode.BLOCK,
    *,
    clause_index: int = 0,
    options: SolveOptions | None = None,
    counters: OpCounters | None = None,
) -> ClauseMask:
    options = options or SolveOptions(mode=mode)
    width = 1 << v
    check_width(width, options.max_width_bits)
    signs = _signs(clause, v)

    match mode:
        case Mode.FAITHFUL:
            value, _ = _faithful_product(signs, v, counters)
            mask = BitField.from_bignat(value, width)
        case _:
            mask = _block_mask(signs, v, options, counters)

    if counters is not None:
        counters.masks_built += 1
    return ClauseMask(mask=mask, clause_index=clause_index)


def _decide_faithful(
    formula: Formula, options: SolveOptions, counters: OpCounters | None
) -> tuple[int | None, BitField | None, int]:
    v = formula.var_count
    width = 1 << v
    unsolvable = (1 << width) - 1
    result = 0
    peak_bits = width
    halted = None
    for index, clause in enumerate(formula.clauses):
        clause_result, clause_peak = _faithful_product(_signs(clause, v), v, counters)
        peak_bits = max(peak_bits, clause_peak)
        result |= clause_result
        if counters is not None:
            counters.masks_built += 1
            counters.clauses_processed += 1
            counters.charge(width)
        if result == unsolvable:
            halted = index
            break
    field = BitField.from_bignat(result, width) if options.retain_field else None
    return halted, field, (peak_bits + 7) // 8


def _fold(
    acc: BitField,
    masks: list[BitField],
    first_index: int,
    cursor: int,
    counters: OpCounters | None,
) -> tuple[int | None, int]:
    for offset, mask in enumerate(masks):
        or_accumulate(acc, mask, counters)
        cursor = first_unset_word(acc, cursor, counters)
        if counters is not None:
            counters.clauses_processed += 1
        if cursor == len(acc.words):
            return first_index + offset, cursor
    return None, cursor


def _decide_block(
    formula: Formula, options: SolveOptions, counters: OpCounters | None
) -> tuple[int | None, BitField, int]:
    v = formula.var_count
    acc = BitField.zeros(1 << v)
    cursor = 0
    for index, clause in enumerate(formula.clauses):
        mask = _block_mask(_signs(clause, v), v, options, counters)
        if counters is not None:
            counters.masks_built += 1
        halted, cursor = _fold(acc, [mask], index, cursor, counters)
        if halted is not None:
            return halted, acc, acc.nbytes
    return None, acc, acc.nbytes


async def _build_batch(
    clauses: tuple[Clause, ...], v: int, options: SolveOptions
) -> list[tuple[BitField, OpCounters]]:
    def build(clause: Clause) -> tuple[BitField, OpCounters]:
        local = OpCounters()
        mask = _block_mask(_signs(clause, v), v, options, local)
        local.masks_built += 1
        return mask, local

    # gather preserves clause order
    return await asyncio.gather(*[asyncio.to_thread(build, clause) for clause in clauses])


def _decide_parallel(
    formula: Formula, options: SolveOptions, counters: OpCounters | None
) -> tuple[int | None, BitField, int]:
    v = formula.var_count
    acc = BitField.zeros(1 << v)
    cursor = 0
    for start in range(0, formula.clause_count, options.workers):
        batch = formula.clauses[start : start + options.workers]
        built = asyncio.run(_build_batch(batch, v, options))
        if counters is not None:
            for _, local in built:
                counters.merge(local)
        halted, cursor = _fold(acc, [mask for mask, _ in built], start, cursor, counters)
        if halted is not None:
            return halted, acc, acc.nbytes
    return None, acc, acc.nbytes


def decide(formula: Formula, options: SolveOptions | None = None) -> SolveReport:
    options = options or SolveOptions()
    v = formula.var_count
    check_width(1 << v, options.max_width_bits)
    counters = OpCounters() if options.instrument else None

    start = time.perf_counter_ns()
    match options.mode:
        case Mode.FAITHFUL:
            halted, field, peak_bytes = _decide_faithful(formula, options, counters)
        case _ if options.parallel:
            halted, field, peak_bytes = _decide_parallel(formula, options, counters)
        case _:
            halted, field, peak_bytes = _decide_block(formula, options, counters)
    elapsed = time.perf_counter_ns() - start

    if halted is not None:
        logger.debug("Accumulator reached all ones at clause %d", halted)

    return SolveReport(
        decision=Decision.SATISFIABLE if halted is None else Decision.UNSATISFIABLE,
        mode=options.mode,
        var_count=v,
        clause_count=formula.clause_count,
        halted_at_clause=halted,
        final_field=field if options.retain_field else None,
        op_counters=counters if counters is not None else OpCounters(),
        wall_time_ns=elapsed,
        peak_field_bytes=peak_bytes,
    )


def extract_models(
    report: SolveReport, formula: Formula, limit: int | None = None
) -> list[Assignment]:
    if report.decision == Decision.UNSATISFIABLE:
        raise ReportError("Cannot extract models from an unsatisfiable report")
    if report.final_field is None:
        raise ReportError("Report did not retain its final field (solve with retain_field)")
    if report.final_field.width != 1 << formula.var_count:
        raise ReportError(
            f"Final field width {report.final_field.width} does not match "
            f"{formula.var_count} variables"
        )
    return [
        Assignment.from_index(k, formula.var_count)
        for k in report.final_field.clear_bit_positions(limit)
    ]


def expected_mask_popcount(clause: Clause, v: int) -> int:
    """Assignments falsifying a canonical clause: each absent variable doubles them."""
    return 1 << (v - len(clause.variables()))


def table_names(v: int) -> tuple[str, ...]:
    """Names by VarId for the tables: letters in reverse, so A is the highest bit."""
    return tuple(ascii_uppercase[v - 1 - var] for var in range(v))


def clause_label(clause: Clause, names: tuple[str, ...]) -> str:
    return " | ".join(
        f"~{names[literal.var]}" if literal.negated else names[literal.var]
        for literal in clause.literals
    )


def table_clauses(v: int) -> list[Clause]:
    """All 3^v - 1 reduced nontrivial clauses, grouped by size, display order within."""
    display = [v - 1 - position for position in range(v)]
    clauses = []
    for size in range(1, v + 1):
        for variables in itertools.combinations(display, size):
            for signs in itertools.product((False, True), repeat=size):
                clauses.append(
                    Clause(
                        literals=tuple(
                            Literal(var=var, negated=negated)
                            for var, negated in zip(variables, signs)
                        )
                    )
                )
    return clauses


def table_rows(v: int) -> list[TableRow]:
    if not 1 <= v <= MAX_TABLE_VARS:
        raise ValueError(f"Tables are limited to 1..{MAX_TABLE_VARS} variables, got {v}")
    names = table_names(v)
    width = 1 << v
    rows = []
    for index, clause in enumerate(table_clauses(v)):
        mask = build_clause_mask(clause, v, Mode.BLOCK, clause_index=index).mask
        falsified = set(mask.set_bit_positions())
        rows.append(
            TableRow(
                clause=clause,
                label=clause_label(clause, names),
                truth_row=tuple(int(k not in falsified) for k in reversed(range(width))),
                mask_value=mask.to_bignat(),
            )
        )
    return rows


def render_tables(v: int) -> str:
    rows = table_rows(v)
    width = 1 << v
    display_names = [ascii_uppercase[position] for position in range(v)]
    columns = [
        ",".join(str((k >> (v - 1 - position)) & 1) for position in range(v))
        for k in reversed(range(width))
    ]

    lines = [
        f"variables: {','.join(display_names)}",
        f"processing order: {','.join(table_names(v))}",
        "",
        "truth rows of all nontrivial clauses",
        "\t".join(["clause", *columns]),
    ]
    lines += ["\t".join([row.label, *map(str, row.truth_row)]) for row in rows]
    lines += [
        "",
        "clause masks",
        "\t".join(["clause", *columns, "value"]),
    ]
    lines += [
        "\t".join([row.label, *(str(1 - bit) for bit in row.truth_row), str(row.mask_value)])
        for row in rows
    ]
    return "\n".join(lines) + "\n"
