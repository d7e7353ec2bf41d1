"""Seeded instance generation and scaling measurements of the mask engine."""

import csv
import itertools
import logging
import math
import statistics
from collections.abc import Iterable, Iterator
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import TextIO

import numpy as np

from bitfield import DEFAULT_MAX_WIDTH_BITS
from cnf import serialize_dimacs
from data_models import (
    BaseRecord,
    BenchConfig,
    Clause,
    Decision,
    FitReport,
    FitResult,
    Formula,
    GenSpec,
    Literal,
    Mode,
    ScalingRecord,
    SolveOptions,
    VerifyConfig,
)
from errors import InsufficientDataError
from maskset import decide

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "mode",
    "v",
    "c",
    "k",
    "seed",
    "decision",
    "wall_time_ns",
    "bit_ops",
    "words_touched",
    "peak_field_bytes",
)
CAPPED = "CAPPED"
MIN_FIT_POINTS = 4


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed determined by the root seed and the given keys."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _numeric_names(v: int) -> tuple[str, ...]:
    return tuple(str(var + 1) for var in range(v))


def generate(spec: GenSpec) -> Formula:
    """Exactly c clauses of k distinct variables, each negated with probability 1/2."""
    if not spec.allow_duplicate_clauses:
        capacity = math.comb(spec.v, spec.k) * 2**spec.k
        if spec.c > capacity:
            raise ValueError(
                f"Only {capacity} distinct {spec.k}-clauses exist over {spec.v} variables, "
                f"{spec.c} requested"
            )

    rng = np.random.default_rng(spec.seed)
    clauses: list[Clause] = []
    seen: set[frozenset[Literal]] = set()
    while len(clauses) < spec.c:
        variables = rng.choice(spec.v, size=spec.k, replace=False)
        negations = rng.random(spec.k) < 0.5
        clause = Clause(
            literals=tuple(
                Literal(var=int(var), negated=bool(negated))
                for var, negated in zip(variables, negations)
            )
        )
        if not spec.allow_duplicate_clauses:
            key = frozenset(clause.literals)
            if key in seen:
                continue
            seen.add(key)
        clauses.append(clause)

    return Formula(clauses=tuple(clauses), var_count=spec.v, names=_numeric_names(spec.v))


def full_clause_set(v: int) -> Formula:
    """All 2^v clauses that mention every variable; no assignment satisfies them all."""
    clauses = tuple(
        Clause(
            literals=tuple(
                Literal(var=var, negated=negated) for var, negated in enumerate(signs)
            )
        )
        for signs in itertools.product((False, True), repeat=v)
    )
    return Formula(clauses=clauses, var_count=v, names=_numeric_names(v))


def pigeonhole(pigeons: int, holes: int) -> Formula:
    """Every pigeon sits in a hole and no hole holds two; UNSAT when pigeons > holes."""

    def var(pigeon: int, hole: int) -> int:
        return pigeon * holes + hole

    clauses = [
        Clause(literals=tuple(Literal(var=var(pigeon, hole)) for hole in range(holes)))
        for pigeon in range(pigeons)
    ]
    for hole in range(holes):
        for first, second in itertools.combinations(range(pigeons), 2):
            clauses.append(
                Clause(
                    literals=(
                        Literal(var=var(first, hole), negated=True),
                        Literal(var=var(second, hole), negated=True),
                    )
                )
            )
    v = pigeons * holes
    return Formula(clauses=tuple(clauses), var_count=v, names=_numeric_names(v))


def random_corpus(config: VerifyConfig) -> Iterator[tuple[str, Formula]]:
    """Mixed-k instances; v, k and c per instance all drawn from the root seed."""
    rng = np.random.default_rng(config.seed)
    ks = [k for k in config.ks if k <= config.v_max]
    if not ks:
        raise ValueError(f"No clause width in {config.ks} fits v_max={config.v_max}")
    for index in range(config.count):
        k = int(rng.choice(ks))
        v = int(rng.integers(max(config.v_min, k), config.v_max + 1))
        c = int(rng.integers(1, max(1, round(config.max_ratio * v)) + 1))
        spec = GenSpec(v=v, c=c, k=k, seed=derive_seed(config.seed, index))
        yield f"random[{index}] v={v} c={c} k={k}", generate(spec)


def dump_instance(formula: Formula, directory: str | Path, v: int, rep: int, seed: int) -> Path:
    path = Path(directory) / f"v{v:03d}_r{rep:02d}_{seed}.cnf"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_dimacs(formula), encoding="ascii")
    return path


class _Task(BaseRecord):
    v: int
    rep: int
    c: int
    k: int
    instance_seed: int
    mode: Mode
    max_width_bits: int
    timing_runs: int
    warmup: bool
    dump_dir: str | None = None


def _measure(task: _Task) -> ScalingRecord:
    if (1 << task.v) > task.max_width_bits:
        logger.warning(
            "v=%d needs %d bits per field, over the cap of %d; recording a capped row",
            task.v,
            1 << task.v,
            task.max_width_bits,
        )
        return ScalingRecord(
            mode=task.mode, v=task.v, c=task.c, k=task.k, seed=task.instance_seed
        )

    formula = generate(GenSpec(v=task.v, c=task.c, k=task.k, seed=task.instance_seed))
    if task.dump_dir is not None:
        dump_instance(formula, task.dump_dir, task.v, task.rep, task.instance_seed)

    options = SolveOptions(
        mode=task.mode,
        max_width_bits=task.max_width_bits,
        check_contracts=False,
        instrument=False,
    )
    if task.warmup and task.rep == 0:
        decide(formula, options)

    timed = [decide(formula, options) for _ in range(task.timing_runs)]
    # counters come from a separate pass so the timed runs carry no bookkeeping
    report = decide(formula, options.model_copy(update={"instrument": True}))
    return ScalingRecord(
        mode=task.mode,
        v=task.v,
        c=task.c,
        k=task.k,
        seed=task.instance_seed,
        decision=report.decision,
        wall_time_ns=int(statistics.median(r.wall_time_ns for r in timed)),
        bit_ops=report.op_counters.bit_ops,
        words_touched=report.op_counters.words_touched,
        peak_field_bytes=report.peak_field_bytes,
    )


def run_scaling(
    v_range: Iterable[int],
    ratio: float = 4.3,
    k: int = 3,
    repetitions: int = 5,
    mode: Mode = Mode.BLOCK,
    *,
    seed: int = 0,
    workers: int = 1,
    max_width_bits: int = DEFAULT_MAX_WIDTH_BITS,
    timing_runs: int = 1,
    warmup: bool = True,
    dump_dir: str | None = None,
) -> list[ScalingRecord]:
    """One record per (v, repetition), in that order, at c = round(ratio * v)."""
    tasks = [
        _Task(
            v=v,
            rep=rep,
            c=round(ratio * v),
            k=k,
            instance_seed=derive_seed(seed, v, rep),
            mode=mode,
            timing_runs=timing_runs,
            warmup=warmup,
            max_width_bits=max_width_bits,
            dump_dir=dump_dir,
        )
        for v in v_range
        for rep in range(repetitions)
    ]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_measure, tasks))
    else:
        records = []
        for task in tasks:
            if task.rep == 0:
                logger.info("Measuring v=%d (c=%d, k=%d, %s)", task.v, task.c, task.k, mode)
            records.append(_measure(task))
    return records


def run_config(config: BenchConfig) -> list[ScalingRecord]:
    return run_scaling(
        config.v_range,
        config.ratio,
        config.k,
        config.reps,
        config.mode,
        seed=config.seed,
        workers=config.workers,
        max_width_bits=config.max_width_bits,
        timing_runs=config.timing_runs,
        warmup=config.warmup,
        dump_dir=config.dump_dir,
    )


def _linear_fit(x: np.ndarray, y: np.ndarray) -> FitResult:
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    residual = math.sqrt(float(np.mean((y - predicted) ** 2)))
    return FitResult(slope=float(slope), intercept=float(intercept), residual=residual)


def fit_report(records: Iterable[ScalingRecord]) -> FitReport:
    """Exponential (log2 t against v) versus polynomial (log2 t against log2 n) fits.

    Residuals are root-mean-square errors in log2 of the median wall time per v,
    so the two models are compared on the same scale.
    """
    by_v: dict[int, list[ScalingRecord]] = {}
    for record in records:
        if record.wall_time_ns is not None:
            by_v.setdefault(record.v, []).append(record)
    if len(by_v) < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"Need at least {MIN_FIT_POINTS} distinct v values with measurements, "
            f"got {len(by_v)}"
        )

    v_values = sorted(by_v)
    medians = [
        float(statistics.median(max(r.wall_time_ns or 1, 1) for r in by_v[v]))
        for v in v_values
    ]
    clause_counts = [statistics.median(r.c for r in by_v[v]) for v in v_values]
    widths = [statistics.median(r.k for r in by_v[v]) for v in v_values]

    vs = np.array(v_values, dtype=float)
    log_time = np.log2(np.array(medians))
    c = np.array(clause_counts, dtype=float)
    k = np.array(widths, dtype=float)
    lengths = {"v": vs, "c*k": c * k, "c*k*v": c * k * vs}

    exponential = _linear_fit(vs, log_time)
    by_length = {
        name: _linear_fit(np.log2(np.maximum(n, 1.0)), log_time)
        for name, n in lengths.items()
    }
    polynomial = by_length["c*k*v"]

    log_n = np.log2(np.maximum(lengths["c*k*v"], 1.0))
    quadratic_offset = float(np.mean(log_time - 2.0 * log_n))
    quadratic_residual = math.sqrt(
        float(np.mean((log_time - (2.0 * log_n + quadratic_offset)) ** 2))
    )

    step_ratios = tuple(
        medians[i + 1] / medians[i]
        for i in range(len(v_values) - 1)
        if v_values[i + 1] == v_values[i] + 1
    )
    doubling_factor = 2.0**exponential.slope
    better = "exponential" if exponential.residual < polynomial.residual else "polynomial"
    verdict = (
        f"{better} model fits better: residual {exponential.residual:.4f} (2^v) vs "
        f"{polynomial.residual:.4f} (n^{polynomial.slope:.2f}, n=c*k*v), "
        f"{quadratic_residual:.4f} for n^2; wall time grows x{doubling_factor:.2f} "
        f"per added variable"
    )

    return FitReport(
        v_values=tuple(v_values),
        median_wall_time_ns=tuple(medians),
        exponential=exponential,
        polynomial=polynomial,
        polynomial_by_length=by_length,
        quadratic_residual=quadratic_residual,
        doubling_factor=doubling_factor,
        step_ratios=step_ratios,
        better_model=better,
        verdict=verdict,
    )


def write_csv(records: Iterable[ScalingRecord], stream: TextIO) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    count = 0
    for record in records:
        writer.writerow(
            [
                record.mode.value,
                record.v,
                record.c,
                record.k,
                record.seed,
                record.decision.value if record.decision is not None else CAPPED,
                *(
                    "" if value is None else value
                    for value in (
                        record.wall_time_ns,
                        record.bit_ops,
                        record.words_touched,
                        record.peak_field_bytes,
                    )
                ),
            ]
        )
        count += 1
    return count


def read_csv(stream: TextIO) -> list[ScalingRecord]:
    def optional_int(text: str) -> int | None:
        return int(text) if text else None

    records = []
    for row in csv.DictReader(stream):
        records.append(
            ScalingRecord(
                mode=Mode(row["mode"]),
                v=int(row["v"]),
                c=int(row["c"]),
                k=int(row["k"]),
                seed=int(row["seed"]),
                decision=None if row["decision"] == CAPPED else Decision(row["decision"]),
                wall_time_ns=optional_int(row["wall_time_ns"]),
                bit_ops=optional_int(row["bit_ops"]),
                words_touched=optional_int(row["words_touched"]),
                peak_field_bytes=optional_int(row["peak_field_bytes"]),
            )
        )
    return records
