"""CNF parsing, serialization, canonicalization and variable ordering."""

import logging
import re
from collections.abc import Sequence

from data_models import (
    Clause,
    Dialect,
    Formula,
    Literal,
    OrderKind,
    OrderScheme,
    Policy,
)
from errors import CanonicalizationError, OrderingError, ParseError

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^p\s+cnf\s+(\d+)\s+(\d+)\s*$")
_TOKEN = re.compile(r"\S+")
_DIMACS_HEADER_LINE = re.compile(r"(?m)^\s*p\s+cnf\b")
_DIMACS_COMMENT = re.compile(r"c(\s|$)")
_DIMACS_CLAUSE_LINE = re.compile(r"[-+\d\s]+")

_INLINE_TOKEN = re.compile(
    r"(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<neg>[~!])"
    r"|(?P<or>\|)"
    r"|(?P<and>&)"
    r"|(?P<lparen>\()"
    r"|(?P<rparen>\))"
    r"|(?P<space>\s+)"
    r"|(?P<bad>.)"
)


def _decode(data: bytes | str, source: str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        return data.decode("ascii")
    except UnicodeDecodeError as e:
        line = data[: e.start].count(b"\n") + 1
        column = e.start - (data.rfind(b"\n", 0, e.start) + 1) + 1
        raise ParseError("input is not ASCII", line, column, source) from e


def _literal(value: int) -> Literal:
    return Literal(var=abs(value) - 1, negated=value < 0)


def parse_dimacs(data: bytes | str, source: str = "<input>") -> Formula:
    text = _decode(data, source)

    header: tuple[int, int, int] | None = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    current_start = (1, 1)
    max_var = 0

    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("%"):
            break
        if stripped.startswith("p"):
            column = line.index("p") + 1
            if header is not None:
                raise ParseError("duplicate 'p cnf' header", line_no, column, source)
            if clauses or current:
                raise ParseError("'p cnf' header after clauses", line_no, column, source)
            match = _HEADER.match(stripped)
            if match is None:
                raise ParseError(
                    f"malformed header {stripped!r}, expected 'p cnf <nvars> <nclauses>'",
                    line_no,
                    column,
                    source,
                )
            header = (int(match.group(1)), int(match.group(2)), line_no)
            continue

        for token in _TOKEN.finditer(line):
            column = token.start() + 1
            try:
                value = int(token.group())
            except ValueError:
                raise ParseError(
                    f"invalid literal {token.group()!r}", line_no, column, source
                ) from None
            if value == 0:
                clauses.append(tuple(current))
                current = []
                continue
            if header is not None and abs(value) > header[0]:
                raise ParseError(
                    f"literal {value} out of declared range 1..{header[0]}",
                    line_no,
                    column,
                    source,
                )
            if not current:
                current_start = (line_no, column)
            current.append(value)
            max_var = max(max_var, abs(value))

    if current:
        raise ParseError("missing terminating 0 at end of input", *current_start, source)
    if header is None and not clauses:
        raise ParseError("empty input", 1, 1, source)
    if header is not None and header[1] != len(clauses):
        raise ParseError(
            f"header declares {header[1]} clauses but input has {len(clauses)}",
            header[2],
            1,
            source,
        )

    var_count = header[0] if header is not None else max_var
    return Formula(
        clauses=tuple(
            Clause(literals=tuple(_literal(value) for value in clause))
            for clause in clauses
        ),
        var_count=var_count,
        names=tuple(str(var + 1) for var in range(var_count)),
        dialect=Dialect.DIMACS,
    )


def serialize_dimacs(formula: Formula) -> str:
    lines = [f"p cnf {formula.var_count} {formula.clause_count}"]
    for clause in formula.clauses:
        numbers = [
            str(-(literal.var + 1) if literal.negated else literal.var + 1)
            for literal in clause.literals
        ]
        lines.append(" ".join([*numbers, "0"]))
    return "\n".join(lines) + "\n"


class _InlineParser:
    """Recursive descent over `(A | ~B) & C`; VarIds follow first occurrence."""

    def __init__(self, text: str, source: str) -> None:
        self.text = text
        self.source = source
        self.tokens = [
            (match.lastgroup, match.group(), match.start())
            for match in _INLINE_TOKEN.finditer(text)
            if match.lastgroup != "space"
        ]
        self.position = 0
        self.names: dict[str, int] = {}

    def error(self, message: str, offset: int) -> ParseError:
        line = self.text.count("\n", 0, offset) + 1
        column = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return ParseError(message, line, column, self.source)

    def peek(self) -> tuple[str | None, str, int]:
        if self.position < len(self.tokens):
            return self.tokens[self.position]
        return (None, "", len(self.text))

    def take(self, kind: str, what: str) -> tuple[str | None, str, int]:
        token = self.peek()
        if token[0] != kind:
            found = repr(token[1]) if token[0] is not None else "end of input"
            raise self.error(f"expected {what}, found {found}", token[2])
        self.position += 1
        return token

    def parse(self) -> Formula:
        if not self.tokens:
            raise self.error("empty input", 0)
        clauses = [self.clause()]
        while self.peek()[0] == "and":
            self.position += 1
            clauses.append(self.clause())
        kind, text, offset = self.peek()
        if kind == "bad":
            raise self.error(f"unexpected character {text!r}", offset)
        if kind is not None:
            raise self.error(f"expected '&' or end of input, found {text!r}", offset)
        return Formula(
            clauses=tuple(clauses),
            var_count=len(self.names),
            names=tuple(self.names),
            dialect=Dialect.INLINE,
        )

    def clause(self) -> Clause:
        if self.peek()[0] == "lparen":
            self.position += 1
            if self.peek()[0] == "rparen":
                self.position += 1
                return Clause()
            literals = self.disjunction()
            self.take("rparen", "')'")
            return Clause(literals=literals)
        return Clause(literals=self.disjunction())

    def disjunction(self) -> tuple[Literal, ...]:
        literals = [self.literal()]
        while self.peek()[0] == "or":
            self.position += 1
            literals.append(self.literal())
        return tuple(literals)

    def literal(self) -> Literal:
        negated = False
        if self.peek()[0] == "neg":
            self.position += 1
            negated = True
        kind, name, offset = self.peek()
        if kind == "bad":
            raise self.error(f"unexpected character {name!r}", offset)
        _, name, _ = self.take("ident", "a variable name")
        var = self.names.setdefault(name, len(self.names))
        return Literal(var=var, negated=negated)


def parse_inline(data: bytes | str, source: str = "<input>") -> Formula:
    return _InlineParser(_decode(data, source), source).parse()


def sniff_dialect(text: str) -> Dialect:
    if _DIMACS_HEADER_LINE.search(text):
        return Dialect.DIMACS
    clause_lines = 0
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or _DIMACS_COMMENT.match(stripped) or stripped.startswith("%"):
            continue
        if not _DIMACS_CLAUSE_LINE.fullmatch(stripped):
            return Dialect.INLINE
        clause_lines += 1
    return Dialect.DIMACS if clause_lines else Dialect.INLINE


def parse_formula(data: bytes | str, source: str = "<input>") -> Formula:
    text = _decode(data, source)
    match sniff_dialect(text):
        case Dialect.DIMACS:
            return parse_dimacs(text, source)
        case _:
            return parse_inline(text, source)


def canonicalize(raw: Formula, policy: Policy = Policy.LENIENT) -> Formula:
    clauses = []
    for index, clause in enumerate(raw.clauses):
        if clause.is_tautology():
            if policy == Policy.STRICT:
                raise CanonicalizationError(
                    f"Clause {index} contains a variable and its negation", index
                )
            logger.debug("Dropping tautological clause %d", index)
            continue
        seen: set[int] = set()
        literals = []
        for literal in clause.literals:
            if literal.var not in seen:
                seen.add(literal.var)
                literals.append(literal)
        if len(literals) == len(clause.literals):
            clauses.append(clause)
        else:
            clauses.append(Clause(literals=tuple(literals)))
    return raw.model_copy(update={"clauses": tuple(clauses)})


def natural_key(name: str) -> tuple[int, int, str]:
    if name.isdigit():
        return (0, int(name), "")
    return (1, 0, name)


def _first_occurrence(raw: Formula) -> list[int]:
    order: list[int] = []
    seen: set[int] = set()
    for clause in raw.clauses:
        for literal in clause.literals:
            if literal.var not in seen:
                seen.add(literal.var)
                order.append(literal.var)
    # declared-but-unused variables keep their relative order at the end
    order.extend(var for var in range(raw.var_count) if var not in seen)
    return order


def variable_order(raw: Formula, scheme: OrderScheme | None = None) -> Formula:
    scheme = scheme or OrderScheme()
    match scheme.kind:
        case OrderKind.FIRST:
            order = _first_occurrence(raw)
        case OrderKind.SORTED:
            order = sorted(range(raw.var_count), key=lambda var: natural_key(raw.names[var]))
        case OrderKind.EXPLICIT:
            order = list(scheme.explicit)
            if sorted(order) != list(range(raw.var_count)):
                raise OrderingError(
                    f"Explicit order {order} is not a permutation of 0..{raw.var_count - 1}"
                )
        case _:
            raise OrderingError(f"Unsupported ordering scheme: {scheme.kind}")

    if order == list(range(raw.var_count)):
        return raw

    logger.debug("Reordering variables: %s", [raw.names[var] for var in order])
    new_index = [0] * raw.var_count
    for new, old in enumerate(order):
        new_index[old] = new

    return Formula(
        clauses=tuple(
            Clause(
                literals=tuple(
                    Literal(var=new_index[literal.var], negated=literal.negated)
                    for literal in clause.literals
                )
            )
            for clause in raw.clauses
        ),
        var_count=raw.var_count,
        names=tuple(raw.names[old] for old in order),
        dialect=raw.dialect,
    )


def resolve_explicit_order(formula: Formula, names: Sequence[str]) -> OrderScheme:
    table = formula.name_table
    unknown = [name for name in names if name not in table]
    if unknown:
        raise OrderingError(f"Unknown variable(s) in explicit order: {', '.join(unknown)}")
    return OrderScheme(
        kind=OrderKind.EXPLICIT, explicit=tuple(table[name] for name in names)
    )
