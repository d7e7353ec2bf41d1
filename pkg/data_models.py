from enum import StrEnum
from typing import Any

from pydantic import (
    BaseModel,
    Field,
    computed_field,
    field_serializer,
    field_validator,
    model_validator,
)

from bitfield import DEFAULT_MAX_WIDTH_BITS, BitField


class Decision(StrEnum):
    SATISFIABLE = "SATISFIABLE"
    UNSATISFIABLE = "UNSATISFIABLE"


class Mode(StrEnum):
    """How clause masks are computed: literal big-integer products or word blocks."""

    FAITHFUL = "faithful"
    BLOCK = "block"


class Policy(StrEnum):
    STRICT = "strict"
    LENIENT = "lenient"


class OrderKind(StrEnum):
    FIRST = "first"
    SORTED = "sorted"
    EXPLICIT = "explicit"


class Dialect(StrEnum):
    DIMACS = "dimacs"
    INLINE = "inline"


class OutputFormat(StrEnum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"


class BaseRecord(BaseModel, frozen=True, strict=True, extra="ignore"):
    pass


class Literal(BaseRecord):
    var: int = Field(ge=0)
    negated: bool = False


class Clause(BaseRecord):
    literals: tuple[Literal, ...] = ()

    @computed_field
    @property
    def width(self) -> int:
        return len(self.literals)

    def variables(self) -> frozenset[int]:
        return frozenset(literal.var for literal in self.literals)

    def is_tautology(self) -> bool:
        polarity: dict[int, bool] = {}
        for literal in self.literals:
            if polarity.setdefault(literal.var, literal.negated) != literal.negated:
                return True
        return False


class Formula(BaseRecord):
    clauses: tuple[Clause, ...] = ()
    var_count: int = Field(ge=0)
    # names[j] is the external name of VarId j
    names: tuple[str, ...] = ()
    dialect: Dialect = Dialect.DIMACS

    @field_validator("names", mode="before")
    @classmethod
    def normalize_names(cls, names: Any) -> Any:
        if isinstance(names, (tuple, list)):
            return tuple(name.strip() if isinstance(name, str) else name for name in names)
        return names

    @model_validator(mode="after")
    def check_variables(self) -> "Formula":
        if len(self.names) != self.var_count:
            raise ValueError(
                f"Formula declares {self.var_count} variables but names {len(self.names)}"
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError("Variable names must be unique")
        for index, clause in enumerate(self.clauses):
            for literal in clause.literals:
                if literal.var >= self.var_count:
                    raise ValueError(
                        f"Clause {index} references VarId {literal.var} "
                        f"but the formula has {self.var_count} variables"
                    )
        return self

    @computed_field
    @property
    def clause_count(self) -> int:
        return len(self.clauses)

    @computed_field
    @property
    def literal_count(self) -> int:
        return sum(len(clause.literals) for clause in self.clauses)

    @property
    def name_table(self) -> dict[str, int]:
        return {name: var for var, name in enumerate(self.names)}


class Assignment(BaseRecord):
    values: tuple[bool, ...]

    @classmethod
    def from_index(cls, k: int, var_count: int) -> "Assignment":
        """Decode assignment index k: bit j of k is the value of VarId j."""
        return cls(values=tuple(bool((k >> j) & 1) for j in range(var_count)))

    @computed_field
    @property
    def index(self) -> int:
        return sum(1 << j for j, value in enumerate(self.values) if value)


class OpCounters(BaseModel, extra="ignore"):
    """Mutable instrumentation accumulator filled in by the mask engine."""

    bit_ops: int = 0
    words_touched: int = 0
    masks_built: int = 0
    clauses_processed: int = 0

    def charge(self, bits: int) -> None:
        self.bit_ops += bits
        self.words_touched += (bits + 63) // 64

    def merge(self, other: "OpCounters") -> None:
        self.bit_ops += other.bit_ops
        self.words_touched += other.words_touched
        self.masks_built += other.masks_built
        self.clauses_processed += other.clauses_processed


class ClauseMask(BaseRecord, arbitrary_types_allowed=True):
    mask: BitField
    clause_index: int = 0


class SolveOptions(BaseRecord):
    mode: Mode = Mode.BLOCK
    retain_field: bool = False
    skip_absent: bool = False
    parallel: bool = False
    workers: int = Field(default=4, ge=1)
    instrument: bool = True
    check_contracts: bool = __debug__
    max_width_bits: int = Field(default=DEFAULT_MAX_WIDTH_BITS, ge=1)


class SolveReport(BaseRecord, arbitrary_types_allowed=True):
    decision: Decision
    mode: Mode
    var_count: int
    clause_count: int
    halted_at_clause: int | None = None
    final_field: BitField | None = None
    op_counters: OpCounters = Field(default_factory=OpCounters)
    wall_time_ns: int = 0
    peak_field_bytes: int = 0

    @field_validator("final_field", mode="plain")
    @classmethod
    def parse_final_field(cls, value: Any) -> BitField | None:
        if isinstance(value, str):
            return BitField.from_hex(value)
        if value is None or isinstance(value, BitField):
            return value
        raise ValueError(f"Expected a BitField or its hex form, got {type(value).__name__}")

    @field_serializer("final_field")
    def serialize_final_field(self, value: BitField | None) -> str | None:
        return value.to_hex() if value is not None else None

    @model_validator(mode="after")
    def check_halt(self) -> "SolveReport":
        halted = self.halted_at_clause is not None
        if halted != (self.decision == Decision.UNSATISFIABLE):
            raise ValueError("halted_at_clause must be present exactly when UNSATISFIABLE")
        return self


class OracleResult(BaseRecord):
    decision: Decision
    witness: Assignment | None = None
    assignments_checked: int = 0

    @model_validator(mode="after")
    def check_witness(self) -> "OracleResult":
        if (self.witness is not None) != (self.decision == Decision.SATISFIABLE):
            raise ValueError("witness must be present exactly when SATISFIABLE")
        return self


class TableRow(BaseRecord):
    clause: Clause
    label: str
    # display order: leftmost entry is assignment index 2^v - 1
    truth_row: tuple[int, ...]
    mask_value: int


class GenSpec(BaseRecord):
    v: int = Field(ge=1)
    c: int = Field(ge=0)
    k: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=1 << 64)
    allow_duplicate_clauses: bool = True

    @model_validator(mode="after")
    def check_width(self) -> "GenSpec":
        if self.k > self.v:
            raise ValueError(f"k={self.k} literals per clause exceeds v={self.v} variables")
        return self


class ScalingRecord(BaseRecord):
    mode: Mode
    v: int
    c: int
    k: int
    seed: int
    decision: Decision | None = None
    wall_time_ns: int | None = None
    bit_ops: int | None = None
    words_touched: int | None = None
    peak_field_bytes: int | None = None

    @computed_field
    @property
    def capped(self) -> bool:
        return self.decision is None


class FitResult(BaseRecord):
    slope: float
    intercept: float
    residual: float


class FitReport(BaseRecord):
    v_values: tuple[int, ...]
    median_wall_time_ns: tuple[float, ...]
    exponential: FitResult
    polynomial: FitResult
    polynomial_by_length: dict[str, FitResult]
    quadratic_residual: float
    doubling_factor: float
    step_ratios: tuple[float, ...]
    better_model: str
    verdict: str


class BenchConfig(BaseRecord):
    name: str = "scaling"
    v_min: int = Field(default=4, ge=1)
    v_max: int = Field(default=20, ge=1)
    ratio: float = Field(default=4.3, gt=0)
    k: int = Field(default=3, ge=1)
    reps: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)
    mode: Mode = Mode.BLOCK
    workers: int = Field(default=1, ge=1)
    timing_runs: int = Field(default=1, ge=1)
    warmup: bool = True
    max_width_bits: int = Field(default=DEFAULT_MAX_WIDTH_BITS, ge=1)
    dump_dir: str | None = None

    @field_validator("ratio", mode="before")
    @classmethod
    def coerce_ratio(cls, value: Any) -> Any:
        if isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        return value

    @model_validator(mode="after")
    def check_range(self) -> "BenchConfig":
        if self.v_min > self.v_max:
            raise ValueError(f"Empty v range {self.v_min}..{self.v_max}")
        return self

    @property
    def v_range(self) -> range:
        return range(self.v_min, self.v_max + 1)


class VerifyConfig(BaseRecord):
    count: int = Field(default=10_000, ge=0)
    v_min: int = Field(default=1, ge=1)
    v_max: int = Field(default=10, ge=1)
    ks: tuple[int, ...] = (1, 2, 3, 4)
    max_ratio: float = Field(default=6.0, gt=0)
    seed: int = Field(default=0, ge=0)
    brute_force_max_vars: int = Field(default=24, ge=0)


class VerifySummary(BaseRecord):
    instances: int
    agreements: int
    disagreements: int
    witness_failures: int
    satisfiable: int
    brute_force_checked: int
    disagreeing_instances: tuple[str, ...] = ()


class OrderScheme(BaseRecord):
    """Processing order for variables; explicit lists VarIds, first processed first."""

    kind: OrderKind = OrderKind.FIRST
    explicit: tuple[int, ...] = ()
