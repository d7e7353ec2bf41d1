"""Independent ground truth for the mask engine: truth tables and DPLL."""

import logging
from collections.abc import Iterable

import numpy as np

from data_models import (
    Assignment,
    Decision,
    Formula,
    OracleResult,
    SolveOptions,
    VerifySummary,
)
from errors import FormulaError, OracleLimitExceeded
from maskset import decide

logger = logging.getLogger(__name__)

DEFAULT_BRUTE_FORCE_MAX_VARS = 24


def evaluate(formula: Formula, assignment: Assignment) -> bool:
    if len(assignment.values) != formula.var_count:
        raise FormulaError(
            f"Assignment has {len(assignment.values)} values "
            f"for {formula.var_count} variables"
        )
    values = assignment.values
    return all(
        any(values[literal.var] != literal.negated for literal in clause.literals)
        for clause in formula.clauses
    )


def _satisfying_rows(formula: Formula, max_vars: int) -> np.ndarray:
    """Boolean vector over k = 0..2^v-1, true where assignment k satisfies the formula."""
    v = formula.var_count
    if v > max_vars:
        raise OracleLimitExceeded(
            f"Truth table over {v} variables exceeds the limit of {max_vars}"
        )
    rows = np.arange(1 << v, dtype=np.uint32)
    alive = np.ones(1 << v, dtype=bool)
    for clause in formula.clauses:
        satisfied = np.zeros(1 << v, dtype=bool)
        for literal in clause.literals:
            value = ((rows >> np.uint32(literal.var)) & np.uint32(1)).astype(bool)
            satisfied |= ~value if literal.negated else value
        alive &= satisfied
    return alive


def brute_force(
    formula: Formula, max_vars: int = DEFAULT_BRUTE_FORCE_MAX_VARS
) -> OracleResult:
    """Try assignments in ascending k; the witness is the lowest satisfying k."""
    alive = _satisfying_rows(formula, max_vars)
    hits = np.flatnonzero(alive)
    if hits.size == 0:
        return OracleResult(
            decision=Decision.UNSATISFIABLE, assignments_checked=int(alive.size)
        )
    k = int(hits[0])
    witness = Assignment.from_index(k, formula.var_count)
    if not evaluate(formula, witness):
        raise RuntimeError(f"Truth table witness k={k} fails direct evaluation")
    return OracleResult(
        decision=Decision.SATISFIABLE, witness=witness, assignments_checked=k + 1
    )


def satisfying_assignments(
    formula: Formula, max_vars: int = DEFAULT_BRUTE_FORCE_MAX_VARS
) -> list[Assignment]:
    return [
        Assignment.from_index(int(k), formula.var_count)
        for k in np.flatnonzero(_satisfying_rows(formula, max_vars))
    ]


def _propagate(
    clauses: list[tuple[tuple[int, bool], ...]], values: list[bool | None]
) -> bool:
    """Unit propagation in place; False on conflict."""
    changed = True
    while changed:
        changed = False
        for clause in clauses:
            unassigned = None
            free = 0
            satisfied = False
            for var, negated in clause:
                value = values[var]
                if value is None:
                    free += 1
                    unassigned = (var, negated)
                elif value != negated:
                    satisfied = True
                    break
            if satisfied:
                continue
            if free == 0:
                return False
            if free == 1 and unassigned is not None:
                var, negated = unassigned
                values[var] = not negated
                changed = True
    return True


def _all_satisfied(
    clauses: list[tuple[tuple[int, bool], ...]], values: list[bool | None]
) -> bool:
    return all(
        any(values[var] is not None and values[var] != negated for var, negated in clause)
        for clause in clauses
    )


def dpll(formula: Formula) -> OracleResult:
    """Unit propagation, first-unassigned branching, FALSE before TRUE, no learning."""
    clauses = [
        tuple((literal.var, literal.negated) for literal in clause.literals)
        for clause in formula.clauses
    ]
    leaves = 0

    def search(values: list[bool | None]) -> list[bool | None] | None:
        nonlocal leaves
        values = list(values)
        if not _propagate(clauses, values):
            leaves += 1
            return None
        if _all_satisfied(clauses, values):
            leaves += 1
            # completing with FALSE is what FALSE-first branching would find
            return [False if value is None else value for value in values]
        var = values.index(None)
        for choice in (False, True):
            values[var] = choice
            found = search(values)
            if found is not None:
                return found
        return None

    found = search([None] * formula.var_count)
    if found is None:
        return OracleResult(decision=Decision.UNSATISFIABLE, assignments_checked=leaves)
    witness = Assignment(values=tuple(bool(value) for value in found))
    if not evaluate(formula, witness):
        raise RuntimeError("DPLL witness fails direct evaluation")
    return OracleResult(
        decision=Decision.SATISFIABLE, witness=witness, assignments_checked=leaves
    )


def cross_check(
    formulas: Iterable[tuple[str, Formula]],
    options: SolveOptions | None = None,
    brute_force_max_vars: int = DEFAULT_BRUTE_FORCE_MAX_VARS,
) -> VerifySummary:
    """Compare the mask engine against brute force (when small enough) and DPLL."""
    options = options or SolveOptions()
    instances = agreements = witness_failures = satisfiable = brute_checked = 0
    disagreeing: list[str] = []

    for name, formula in formulas:
        instances += 1
        decisions = [decide(formula, options).decision]
        oracles = [dpll(formula)]
        if formula.var_count <= brute_force_max_vars:
            oracles.append(brute_force(formula, brute_force_max_vars))
            brute_checked += 1
        decisions += [result.decision for result in oracles]

        for result in oracles:
            if result.witness is not None and not evaluate(formula, result.witness):
                witness_failures += 1
                logger.warning("Witness fails evaluation on %s", name)

        if len(set(decisions)) == 1:
            agreements += 1
            satisfiable += decisions[0] == Decision.SATISFIABLE
        else:
            disagreeing.append(name)
            logger.warning("Disagreement on %s: %s", name, [str(d) for d in decisions])

        if instances % 1000 == 0:
            logger.info("Cross-checked %d instances", instances)

    return VerifySummary(
        instances=instances,
        agreements=agreements,
        disagreements=len(disagreeing),
        witness_failures=witness_failures,
        satisfiable=satisfiable,
        brute_force_checked=brute_checked,
        disagreeing_instances=tuple(disagreeing),
    )
