"""Job-shop problem instances: seeded generation and text-format I/O.

An instance is a table of operations: every job is an ordered list of
(machine, duration) pairs.  Two text layouts are supported: ``taillard``
(header, duration matrix, 1-indexed machine-order matrix) and ``orlib``
(header, then one line per job of interleaved 0-indexed machine/duration
pairs).  The orlib layout is the canonical serialization.

Random instances come from a multiplicative congruential generator with
two independent streams, one for durations and one for machine orders,
so a (jobs, machines, time_seed, machine_seed) tuple pins an instance
exactly, byte for byte.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

LCG_MULTIPLIER = 16807
LCG_MODULUS = 2**31 - 1
_SCHRAGE_Q = 127773  # LCG_MODULUS // LCG_MULTIPLIER
_SCHRAGE_R = 2836  # LCG_MODULUS % LCG_MULTIPLIER

FORMATS = ("orlib", "taillard")


class InstanceError(ValueError):
    """Base class for instance construction and I/O failures."""


class InvalidSeedError(InstanceError):
    """Generator state outside [1, modulus - 1]."""


class ParseError(InstanceError):
    """Malformed instance text; carries 1-based line/column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class DimensionMismatchError(ParseError):
    """Body token count does not match the header dimensions."""


class MachineIndexError(ParseError):
    """Machine index outside the valid range for the instance."""


@dataclass(frozen=True)
class Operation:
    machine: int
    duration: int


@dataclass(frozen=True)
class Instance:
    """Immutable problem instance: per-job ordered (machine, duration) lists."""

    jobs: tuple[tuple[Operation, ...], ...]
    num_machines: int

    def __post_init__(self):
        if self.num_machines < 1:
            raise InstanceError(f"need at least one machine, got {self.num_machines}")
        if not self.jobs:
            raise InstanceError("need at least one job")
        for i, ops in enumerate(self.jobs):
            if not ops:
                raise InstanceError(f"job {i} has no operations")
            for k, op in enumerate(ops):
                if not 0 <= op.machine < self.num_machines:
                    raise MachineIndexError(
                        f"job {i} op {k}: machine {op.machine} outside [0, {self.num_machines - 1}]"
                    )
                if op.duration <= 0:
                    raise InstanceError(
                        f"job {i} op {k}: duration must be positive, got {op.duration}"
                    )

    @property
    def num_jobs(self) -> int:
        return len(self.jobs)

    @property
    def total_operations(self) -> int:
        return sum(len(ops) for ops in self.jobs)

    @property
    def max_duration(self) -> int:
        return max((op.duration for ops in self.jobs for op in ops), default=1)


def lcg_next(state: int) -> tuple[int, float]:
    """Advance the congruential stream once: X' = (16807 * X) mod (2^31 - 1).

    Uses the Schrage decomposition so every intermediate fits a signed
    32-bit word.  Returns the new state and the uniform draw X'/m, which
    lies strictly inside (0, 1) because 0 is not reachable from a valid
    state.
    """
    if not 1 <= state < LCG_MODULUS:
        raise InvalidSeedError(f"state must lie in [1, {LCG_MODULUS - 1}], got {state}")
    hi, lo = divmod(state, _SCHRAGE_Q)
    nxt = LCG_MULTIPLIER * lo - _SCHRAGE_R * hi
    if nxt < 0:
        nxt += LCG_MODULUS
    return nxt, nxt / LCG_MODULUS


def uniform_int(state: int, lo: int, hi: int) -> tuple[int, int]:
    """Draw an integer uniformly from [lo, hi], consuming exactly one step."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    state, u = lcg_next(state)
    return state, math.floor(lo + u * (hi - lo + 1))


def generate_random(jobs: int, machines: int, time_seed: int, machine_seed: int) -> Instance:
    """Build a jobs x machines instance from two independent seeded streams.

    Durations are drawn row-major from U[1, 99] on the time stream.  Each
    machine-order row starts as the identity permutation and is shuffled
    in place: position j swaps with a position drawn from [j, machines-1]
    on the machine stream, so rows stay permutations and the whole
    instance is reproducible from its seed pair alone.
    """
    if jobs < 1:
        raise InstanceError(f"need at least one job, got {jobs}")
    if machines < 1:
        raise InstanceError(f"need at least one machine, got {machines}")
    for name, seed in (("time_seed", time_seed), ("machine_seed", machine_seed)):
        if not 1 <= seed < LCG_MODULUS:
            raise InvalidSeedError(f"{name} must lie in [1, {LCG_MODULUS - 1}], got {seed}")

    tstate = time_seed
    durations: list[list[int]] = []
    for _ in range(jobs):
        row = []
        for _ in range(machines):
            tstate, d = uniform_int(tstate, 1, 99)
            row.append(d)
        durations.append(row)

    mstate = machine_seed
    orders: list[list[int]] = []
    for _ in range(jobs):
        perm = list(range(machines))
        for j in range(machines):
            mstate, k = uniform_int(mstate, j, machines - 1)
            perm[j], perm[k] = perm[k], perm[j]
        orders.append(perm)

    job_ops = tuple(
        tuple(Operation(machine=orders[i][j], duration=durations[i][j]) for j in range(machines))
        for i in range(jobs)
    )
    return Instance(jobs=job_ops, num_machines=machines)


_TOKEN = re.compile(r"\S+")


def _numeric_lines(text: str):
    """Yield (line_no, line) for lines that look like data, not labels.

    Benchmark files interleave word markers ("Times", "Machines") and
    description lines with the matrices.  A line counts as data when its
    first non-space character starts a number; anything inside such a
    line that is not an integer is then a real parse error, not metadata.
    """
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.lstrip()
        if not stripped:
            continue
        first = stripped[0]
        if first.isdigit() or (first in "+-" and len(stripped) > 1 and stripped[1].isdigit()):
            yield no, line


def _int_tokens(no: int, line: str) -> list[tuple[int, int, int]]:
    """Parse one data line into (value, line, column) triples."""
    out = []
    for m in _TOKEN.finditer(line):
        try:
            value = int(m.group())
        except ValueError:
            raise ParseError(f"expected an integer, got {m.group()!r}", no, m.start() + 1) from None
        out.append((value, no, m.start() + 1))
    return out


def _parse_header(lines) -> tuple[int, int]:
    if not lines:
        raise ParseError("no numeric content found")
    no, line = lines[0]
    header = _int_tokens(no, line)
    if len(header) < 2:
        raise ParseError("header needs job and machine counts", no, 1)
    jobs, machines = header[0][0], header[1][0]
    if jobs < 0:
        raise ParseError(f"job count must be non-negative, got {jobs}", no, header[0][2])
    if machines < 1:
        raise ParseError(f"machine count must be positive, got {machines}", no, header[1][2])
    return jobs, machines


def parse_instance(text: str, format: str = "orlib") -> Instance:
    """Parse instance text in the given format.

    Metadata lines (anything containing letters) and blank lines are
    skipped wherever they appear; extra numbers on the header line, such
    as seeds or bounds, are ignored, and so is anything after the
    expected body.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}, expected one of {FORMATS}")
    lines = list(_numeric_lines(text))
    jobs, machines = _parse_header(lines)
    if format == "orlib":
        return _parse_orlib(lines[1:], jobs, machines)
    return _parse_taillard(lines[1:], jobs, machines)


def _parse_orlib(body_lines, jobs: int, machines: int) -> Instance:
    if len(body_lines) < jobs:
        raise DimensionMismatchError(f"expected {jobs} job lines, found {len(body_lines)}")
    job_ops = []
    for i in range(jobs):
        no, line = body_lines[i]
        tokens = _int_tokens(no, line)
        if len(tokens) % 2 != 0:
            raise DimensionMismatchError(
                f"job {i}: odd token count {len(tokens)}, need machine/duration pairs", no, 1
            )
        ops = []
        for (mval, mline, mcol), (dval, dline, dcol) in zip(tokens[0::2], tokens[1::2]):
            if not 0 <= mval < machines:
                raise MachineIndexError(
                    f"machine {mval} outside [0, {machines - 1}]", mline, mcol
                )
            if dval <= 0:
                raise ParseError(f"duration must be positive, got {dval}", dline, dcol)
            ops.append(Operation(machine=mval, duration=dval))
        if not ops:
            raise DimensionMismatchError(f"job {i} has no operations", no, 1)
        job_ops.append(tuple(ops))
    return Instance(jobs=tuple(job_ops), num_machines=machines)


def _parse_taillard(body_lines, jobs: int, machines: int) -> Instance:
    tokens = [t for no, line in body_lines for t in _int_tokens(no, line)]
    need = 2 * jobs * machines
    if len(tokens) < need:
        raise DimensionMismatchError(
            f"expected {need} values after the header, found {len(tokens)}"
        )
    durations = tokens[: jobs * machines]
    orders = tokens[jobs * machines : need]
    job_ops = []
    for i in range(jobs):
        ops = []
        for j in range(machines):
            dval, dline, dcol = durations[i * machines + j]
            mval, mline, mcol = orders[i * machines + j]
            if not 1 <= mval <= machines:
                raise MachineIndexError(f"machine {mval} outside [1, {machines}]", mline, mcol)
            if dval <= 0:
                raise ParseError(f"duration must be positive, got {dval}", dline, dcol)
            ops.append(Operation(machine=mval - 1, duration=dval))
        job_ops.append(tuple(ops))
    return Instance(jobs=tuple(job_ops), num_machines=machines)


def serialize_instance(instance: Instance, format: str = "orlib") -> str:
    """Render an instance as text; orlib is the canonical layout."""
    if format == "orlib":
        lines = [f"{instance.num_jobs} {instance.num_machines}"]
        for ops in instance.jobs:
            lines.append(" ".join(f"{op.machine} {op.duration}" for op in ops))
        return "\n".join(lines) + "\n"
    if format == "taillard":
        machines = instance.num_machines
        if any(len(ops) != machines for ops in instance.jobs):
            raise InstanceError("taillard layout needs exactly one operation per machine per job")
        lines = [f"{instance.num_jobs} {machines}"]
        lines += [" ".join(str(op.duration) for op in ops) for ops in instance.jobs]
        lines += [" ".join(str(op.machine + 1) for op in ops) for ops in instance.jobs]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}, expected one of {FORMATS}")


def load_instance(path, format: str = "orlib") -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read(), format)


def save_instance(instance: Instance, path, format: str = "orlib") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_instance(instance, format))
