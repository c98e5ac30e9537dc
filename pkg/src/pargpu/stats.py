"""Per-SM stat sheets and their reduction into one GPU report.

Every SM owns a private :class:`StatSheet`; nothing an SM does during its
cycle writes a counter that another SM can see.  After a kernel drains the
sheets are folded together in ascending SM order, counters by summation
and set-typed stats by union, which gives the same totals a single global
counter would have produced in a sequential run.

Memory-side counters (L2, DRAM, interconnect) are only touched from the
sequential phases and are kept in plain dicts.

The counter registry is a representative subset, not an exhaustive list of
what a production simulator would track.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class Counter(IntEnum):
    INSTRUCTIONS_ALU = 0
    INSTRUCTIONS_LD = 1
    INSTRUCTIONS_ST = 2
    INSTRUCTIONS_BAR = 3
    INSTRUCTIONS_EXIT = 4
    L1_HITS = 5  # loads only
    L1_MISSES = 6  # loads that sent a request to L2
    L1_MSHR_MERGES = 7  # loads folded into an outstanding miss
    ACTIVE_CYCLES = 8
    ISSUED_CTAS = 9
    STALL_CYCLES_MEM = 10
    STALL_CYCLES_EXEC = 11
    L0I_ACCESSES = 12


COUNTER_NAMES = tuple(c.name.lower() for c in Counter)
INSTRUCTION_COUNTERS = (
    Counter.INSTRUCTIONS_ALU,
    Counter.INSTRUCTIONS_LD,
    Counter.INSTRUCTIONS_ST,
    Counter.INSTRUCTIONS_BAR,
    Counter.INSTRUCTIONS_EXIT,
)

MEMORY_COUNTERS = (
    "l2_accesses",
    "l2_hits",
    "l2_misses",
    "l2_mshr_merges",
    "l2_writebacks",
    "l2_dram_stall_cycles",
    "l2_load_responses",
    "l2_store_completions",
    "dram_accesses",
    "icnt_packets_to_mem",
    "icnt_packets_to_sm",
)


def empty_memory_counters() -> dict[str, int]:
    return dict.fromkeys(MEMORY_COUNTERS, 0)


@dataclass
class StatSheet:
    counters: list[int] = field(default_factory=lambda: [0] * len(Counter))
    unique_lines: set[int] = field(default_factory=set)

    def __getitem__(self, key: Counter | str) -> int:
        if isinstance(key, str):
            key = Counter[key.upper()]
        return self.counters[key]

    @property
    def instructions(self) -> int:
        return sum(self.counters[c] for c in INSTRUCTION_COUNTERS)

    def merge(self, other: StatSheet) -> None:
        for i, v in enumerate(other.counters):
            self.counters[i] += v
        self.unique_lines |= other.unique_lines

    def copy(self) -> StatSheet:
        return StatSheet(list(self.counters), set(self.unique_lines))

    def reset(self) -> None:
        self.counters = [0] * len(Counter)
        self.unique_lines = set()


@dataclass(frozen=True)
class KernelReport:
    name: str
    cycles: int
    totals: dict[str, int]
    memory: dict[str, int]
    unique_line_count: int


@dataclass(frozen=True)
class GpuStats:
    cycles: int
    totals: dict[str, int]
    memory: dict[str, int]
    unique_line_count: int
    per_sm: tuple[dict[str, int], ...]
    kernels: tuple[KernelReport, ...] = ()

    @property
    def instructions(self) -> int:
        return sum(self.totals[COUNTER_NAMES[c]] for c in INSTRUCTION_COUNTERS)

    @property
    def ipc(self) -> float:
        return self.instructions / self.cycles if self.cycles else 0.0


def reduce(sheets: list[StatSheet], memory_side: dict[str, int], cycles: int) -> GpuStats:
    """Fold per-SM sheets (indexed by SM id) into one report."""
    totals = [0] * len(Counter)
    lines: set[int] = set()
    per_sm = []
    for sheet in sheets:
        for i, v in enumerate(sheet.counters):
            totals[i] += v
        lines |= sheet.unique_lines
        row = dict(zip(COUNTER_NAMES, sheet.counters))
        row["unique_lines"] = len(sheet.unique_lines)
        per_sm.append(row)
    memory = empty_memory_counters()
    memory.update(memory_side)
    return GpuStats(
        cycles=cycles,
        totals=dict(zip(COUNTER_NAMES, totals)),
        memory=memory,
        unique_line_count=len(lines),
        per_sm=tuple(per_sm),
    )


# --------------------------------------------------------------------------
# canonical text report


class ReportFormatError(ValueError):
    pass


def _report_items(gs: GpuStats) -> dict[str, str]:
    items: dict[str, str] = {
        "cycles": str(gs.cycles),
        "instructions": str(gs.instructions),
        "ipc": f"{gs.ipc:.6f}",
        "unique_line_count": str(gs.unique_line_count),
        "num_sms": str(len(gs.per_sm)),
        "num_kernels": str(len(gs.kernels)),
    }
    for k, v in gs.totals.items():
        items[k] = str(v)
    for k, v in gs.memory.items():
        items[k] = str(v)
    for sm_id, row in enumerate(gs.per_sm):
        for k, v in row.items():
            items[f"sm.{sm_id}.{k}"] = str(v)
    for idx, kr in enumerate(gs.kernels):
        prefix = f"kernel.{idx}."
        items[prefix + "name"] = kr.name
        items[prefix + "cycles"] = str(kr.cycles)
        items[prefix + "unique_line_count"] = str(kr.unique_line_count)
        for k, v in kr.totals.items():
            items[prefix + k] = str(v)
        for k, v in kr.memory.items():
            items[prefix + k] = str(v)
    return items


def render_report(gs: GpuStats) -> str:
    items = _report_items(gs)
    return "".join(f"{k} = {items[k]}\n" for k in sorted(items))


def parse_report(text: str) -> dict[str, str]:
    """Parse a canonical report; keys must be strictly increasing."""
    out: dict[str, str] = {}
    prev = None
    for lineno, line in enumerate(text.splitlines(), 1):
        key, sep, value = line.partition(" = ")
        if not sep or not key or " " in key:
            raise ReportFormatError(f"line {lineno}: expected 'key = value'")
        if prev is not None and key <= prev:
            raise ReportFormatError(f"line {lineno}: key {key!r} out of canonical order")
        out[key] = value
        prev = key
    return out


def diff_reports(a: str, b: str) -> str | None:
    """Return the first key (in canonical order) whose values differ, or None."""
    ra, rb = parse_report(a), parse_report(b)
    for key in sorted(ra.keys() | rb.keys()):
        if ra.get(key) != rb.get(key):
            return key
    return None
