"""Workload traces: kernels of CTAs of warps of instructions.

Text grammar (one statement per line, ``#`` starts a comment)::

    KERNEL <name>
    CTA <id>
    WARP <id>
    ALU <latency>
    LD <addr> <size>
    ST <addr> <size>
    BAR
    EXIT

Addresses are decimal or ``0x`` hex.  CTA and warp ids must count up from
zero inside their parent.  Every warp ends with exactly one EXIT.

The synthetic presets in :func:`generate_workload` are invented stand-ins
for four workload classes (few-CTA, balanced, imbalanced, memory-bound);
their instruction mixes are not measured from any real application.
"""

from __future__ import annotations

import random
from collections import Counter as _Tally
from dataclasses import dataclass
from typing import NamedTuple

from .config import GpuConfig

ALU = "ALU"
LD = "LD"
ST = "ST"
BAR = "BAR"
EXIT = "EXIT"
KINDS = (ALU, LD, ST, BAR, EXIT)


class TraceError(ValueError):
    """Malformed trace text or a trace incompatible with the machine."""


class TraceInstruction(NamedTuple):
    pc: int
    kind: str
    latency: int = 0
    addr: int = 0
    size: int = 0


@dataclass(frozen=True)
class WarpTrace:
    warp_id: int
    instructions: tuple[TraceInstruction, ...]


@dataclass(frozen=True)
class CtaTrace:
    cta_id: int
    warps: tuple[WarpTrace, ...]

    @property
    def num_instructions(self) -> int:
        return sum(len(w.instructions) for w in self.warps)


@dataclass(frozen=True)
class KernelTrace:
    name: str
    ctas: tuple[CtaTrace, ...]

    @property
    def num_instructions(self) -> int:
        return sum(c.num_instructions for c in self.ctas)


@dataclass(frozen=True)
class TraceProgram:
    kernels: tuple[KernelTrace, ...]

    @property
    def num_instructions(self) -> int:
        return sum(k.num_instructions for k in self.kernels)


# --------------------------------------------------------------------------
# parsing / rendering


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise TraceError(f"line {lineno}: expected integer, got {tok!r}") from None


class _Builder:
    """Accumulates nested lists while parsing; frozen on finish()."""

    def __init__(self) -> None:
        self.kernels: list[tuple[str, list]] = []

    def _close_warp_check(self, lineno: int) -> None:
        w = self._current_warp()
        if w is not None and (not w[1] or w[1][-1].kind != EXIT):
            raise TraceError(f"line {lineno}: warp {w[0]} does not end with EXIT")

    def _current_warp(self):
        if not self.kernels or not self.kernels[-1][1]:
            return None
        cta = self.kernels[-1][1][-1]
        return cta[1][-1] if cta[1] else None

    def kernel(self, name: str, lineno: int) -> None:
        self._close_warp_check(lineno)
        self.kernels.append((name, []))

    def cta(self, cta_id: int, lineno: int) -> None:
        if not self.kernels:
            raise TraceError(f"line {lineno}: CTA outside KERNEL")
        self._close_warp_check(lineno)
        ctas = self.kernels[-1][1]
        if cta_id != len(ctas):
            raise TraceError(f"line {lineno}: CTA id {cta_id} out of sequence (expected {len(ctas)})")
        ctas.append((cta_id, []))

    def warp(self, warp_id: int, lineno: int) -> None:
        if not self.kernels or not self.kernels[-1][1]:
            raise TraceError(f"line {lineno}: WARP outside CTA")
        self._close_warp_check(lineno)
        warps = self.kernels[-1][1][-1][1]
        if warp_id != len(warps):
            raise TraceError(f"line {lineno}: WARP id {warp_id} out of sequence (expected {len(warps)})")
        warps.append((warp_id, []))

    def instr(self, kind: str, args: list[int], lineno: int) -> None:
        w = self._current_warp()
        if w is None:
            raise TraceError(f"line {lineno}: instruction outside WARP")
        body = w[1]
        if body and body[-1].kind == EXIT:
            raise TraceError(f"line {lineno}: instruction after EXIT in warp {w[0]}")
        pc = len(body)
        if kind == ALU:
            if args[0] <= 0:
                raise TraceError(f"line {lineno}: ALU latency must be positive")
            body.append(TraceInstruction(pc, ALU, latency=args[0]))
        elif kind in (LD, ST):
            addr, size = args
            if addr < 0 or size <= 0:
                raise TraceError(f"line {lineno}: {kind} needs addr >= 0 and size > 0")
            body.append(TraceInstruction(pc, kind, addr=addr, size=size))
        else:
            body.append(TraceInstruction(pc, kind))

    def finish(self, lineno: int) -> TraceProgram:
        self._close_warp_check(lineno)
        kernels = []
        for name, ctas in self.kernels:
            cta_objs = []
            for cta_id, warps in ctas:
                if not warps:
                    raise TraceError(f"kernel {name}: CTA {cta_id} has no warps")
                cta_objs.append(CtaTrace(cta_id, tuple(WarpTrace(wid, tuple(b)) for wid, b in warps)))
            kernels.append(KernelTrace(name, tuple(cta_objs)))
        return TraceProgram(tuple(kernels))


_ARITY = {ALU: 1, LD: 2, ST: 2, BAR: 0, EXIT: 0}


def parse_trace(text: str, cfg: GpuConfig | None = None) -> TraceProgram:
    """Parse trace text; when ``cfg`` is given also check it fits the machine."""
    b = _Builder()
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        op = toks[0]
        if op == "KERNEL":
            if len(toks) != 2:
                raise TraceError(f"line {lineno}: KERNEL takes one name")
            b.kernel(toks[1], lineno)
        elif op in ("CTA", "WARP"):
            if len(toks) != 2:
                raise TraceError(f"line {lineno}: {op} takes one id")
            (b.cta if op == "CTA" else b.warp)(_int(toks[1], lineno), lineno)
        elif op in _ARITY:
            if len(toks) - 1 != _ARITY[op]:
                raise TraceError(f"line {lineno}: {op} takes {_ARITY[op]} operand(s)")
            b.instr(op, [_int(t, lineno) for t in toks[1:]], lineno)
        else:
            raise TraceError(f"line {lineno}: unknown statement {op!r}")
    prog = b.finish(lineno)
    if cfg is not None:
        validate_program(prog, cfg)
    return prog


def render_trace(prog: TraceProgram) -> str:
    out: list[str] = []
    for k in prog.kernels:
        out.append(f"KERNEL {k.name}")
        for c in k.ctas:
            out.append(f"CTA {c.cta_id}")
            for w in c.warps:
                out.append(f"WARP {w.warp_id}")
                for ins in w.instructions:
                    if ins.kind == ALU:
                        out.append(f"ALU {ins.latency}")
                    elif ins.kind in (LD, ST):
                        out.append(f"{ins.kind} {ins.addr:#x} {ins.size}")
                    else:
                        out.append(ins.kind)
    return "\n".join(out) + "\n"


def load_trace(path: str, cfg: GpuConfig | None = None) -> TraceProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read(), cfg)


def validate_program(prog: TraceProgram, cfg: GpuConfig) -> None:
    for k in prog.kernels:
        for c in k.ctas:
            if len(c.warps) > cfg.warps_per_sm:
                raise TraceError(
                    f"kernel {k.name} CTA {c.cta_id}: {len(c.warps)} warps per CTA "
                    f"exceeds warps_per_sm ({cfg.warps_per_sm})"
                )
            for w in c.warps:
                body = w.instructions
                if not body or body[-1].kind != EXIT or any(i.kind == EXIT for i in body[:-1]):
                    raise TraceError(f"kernel {k.name} CTA {c.cta_id} warp {w.warp_id}: misplaced EXIT")
                for ins in body:
                    if ins.kind in (LD, ST) and ins.size > cfg.l1d_line_bytes:
                        raise TraceError(
                            f"kernel {k.name} CTA {c.cta_id} warp {w.warp_id} pc {ins.pc}: "
                            f"access size {ins.size} exceeds line size {cfg.l1d_line_bytes}"
                        )


# --------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class TraceSummary:
    ctas_per_kernel: tuple[int, ...]
    warps_per_kernel: tuple[int, ...]
    instructions_per_kernel: tuple[int, ...]
    by_kind: dict[str, int]

    @property
    def total_instructions(self) -> int:
        return sum(self.instructions_per_kernel)


def trace_stats(prog: TraceProgram) -> TraceSummary:
    tally: _Tally[str] = _Tally()
    for k in prog.kernels:
        for c in k.ctas:
            for w in c.warps:
                tally.update(i.kind for i in w.instructions)
    return TraceSummary(
        ctas_per_kernel=tuple(len(k.ctas) for k in prog.kernels),
        warps_per_kernel=tuple(sum(len(c.warps) for c in k.ctas) for k in prog.kernels),
        instructions_per_kernel=tuple(k.num_instructions for k in prog.kernels),
        by_kind={kind: tally[kind] for kind in KINDS if tally[kind]},
    )


# --------------------------------------------------------------------------
# synthetic workloads

PRESETS = ("two_cta", "balanced", "imbalanced", "memory_heavy")

# named scales used by tests and scripts
SCALE_SMALL = 1
SCALE_MEDIUM = 4
SCALE_LARGE = 12

LINE = 128
TABLE_WINDOWS = 16  # compute presets share a 64-line lookup table
_ALU_LATENCIES = (1, 2, 4, 4, 6, 8)

TWO_CTA_KERNELS = 2
TWO_CTA_WARPS = 32
TWO_CTA_BODY = 24

BALANCED_CTAS = 160
BALANCED_WARPS = 8
BALANCED_BODY = 12

IMBALANCED_CTAS = 48
IMBALANCED_WARPS = 4
IMBALANCED_BODY = 8

MEMORY_CTAS = 80
MEMORY_WARPS = 4
MEMORY_BODY = 12
MEMORY_FOOTPRINT_LINES = 512


def balanced_instruction_count(scale: int) -> int:
    """Closed-form instruction total of the balanced preset."""
    # body + one BAR + EXIT per warp
    return BALANCED_CTAS * BALANCED_WARPS * (BALANCED_BODY * scale + 2)


def _compute_body(rng: random.Random, length: int, base_addr: int, ld_every: int) -> list[tuple]:
    """ALU-dominated straight-line code with a strided load every few slots.

    Loads walk a four-line window starting at ``base_addr``; callers pick
    windows from a small shared table so most misses are served by L2.
    """
    body = []
    for i in range(length):
        if ld_every and i % ld_every == ld_every - 1:
            body.append((LD, base_addr + (i // ld_every % 4) * LINE, 4))
        else:
            body.append((ALU, rng.choice(_ALU_LATENCIES)))
    return body


def _table_window(i: int) -> int:
    return (i % TABLE_WINDOWS) * 4 * LINE


def _warp(warp_id: int, ops: list[tuple]) -> WarpTrace:
    instrs = []
    for pc, op in enumerate(ops):
        kind = op[0]
        if kind == ALU:
            instrs.append(TraceInstruction(pc, ALU, latency=op[1]))
        elif kind in (LD, ST):
            instrs.append(TraceInstruction(pc, kind, addr=op[1], size=op[2]))
        else:
            instrs.append(TraceInstruction(pc, kind))
    instrs.append(TraceInstruction(len(ops), EXIT))
    return WarpTrace(warp_id, tuple(instrs))


def _with_barrier(ops: list[tuple]) -> list[tuple]:
    mid = len(ops) // 2
    return ops[:mid] + [(BAR,)] + ops[mid:]


def _gen_two_cta(rng: random.Random, scale: int) -> TraceProgram:
    kernels = []
    for k in range(TWO_CTA_KERNELS):
        ctas = []
        for c in range(2):
            warps = []
            for w in range(TWO_CTA_WARPS):
                base = _table_window(c * TWO_CTA_WARPS + w)
                warps.append(_warp(w, _compute_body(rng, TWO_CTA_BODY * scale, base, 6)))
            ctas.append(CtaTrace(c, tuple(warps)))
        kernels.append(KernelTrace(f"two_cta_{k}", tuple(ctas)))
    return TraceProgram(tuple(kernels))


def _gen_balanced(rng: random.Random, scale: int) -> TraceProgram:
    # one template per warp index, shared verbatim by every CTA
    templates = [
        _warp(w, _with_barrier(_compute_body(rng, BALANCED_BODY * scale, _table_window(w), 8)))
        for w in range(BALANCED_WARPS)
    ]
    ctas = [CtaTrace(c, tuple(templates)) for c in range(BALANCED_CTAS)]
    return TraceProgram((KernelTrace("balanced", tuple(ctas)),))


def _gen_imbalanced(rng: random.Random, scale: int) -> TraceProgram:
    base_len = IMBALANCED_BODY * scale
    heavy = [rng.random() < 0.15 for _ in range(IMBALANCED_CTAS)]
    heavy[rng.randrange(IMBALANCED_CTAS)] = True
    ctas = []
    for c in range(IMBALANCED_CTAS):
        if heavy[c]:
            length = base_len * rng.randint(13, 24)
        else:
            length = base_len + rng.randint(0, base_len // 4)
        warps = []
        for w in range(IMBALANCED_WARPS):
            base = _table_window(c * IMBALANCED_WARPS + w)
            warps.append(_warp(w, _with_barrier(_compute_body(rng, length, base, 8))))
        ctas.append(CtaTrace(c, tuple(warps)))
    return TraceProgram((KernelTrace("imbalanced", tuple(ctas)),))


def _gen_memory_heavy(rng: random.Random, scale: int) -> TraceProgram:
    ctas = []
    for c in range(MEMORY_CTAS):
        warps = []
        for w in range(MEMORY_WARPS):
            ops: list[tuple] = []
            for _ in range(MEMORY_BODY * scale):
                r = rng.random()
                addr = rng.randrange(MEMORY_FOOTPRINT_LINES) * LINE + rng.randrange(0, LINE, 4)
                if r < 0.4:
                    ops.append((LD, addr, 4))
                elif r < 0.6:
                    ops.append((ST, addr, 4))
                else:
                    ops.append((ALU, rng.choice(_ALU_LATENCIES)))
            warps.append(_warp(w, ops))
        ctas.append(CtaTrace(c, tuple(warps)))
    return TraceProgram((KernelTrace("memory_heavy", tuple(ctas)),))


_GENERATORS = {
    "two_cta": _gen_two_cta,
    "balanced": _gen_balanced,
    "imbalanced": _gen_imbalanced,
    "memory_heavy": _gen_memory_heavy,
}


def generate_workload(preset: str, seed: int, scale: int = SCALE_SMALL) -> TraceProgram:
    """Deterministic synthetic workload; same arguments, same program."""
    try:
        gen = _GENERATORS[preset]
    except KeyError:
        raise TraceError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}") from None
    if scale < 1:
        raise TraceError("scale must be a positive integer")
    rng = random.Random(f"{preset}:{seed}:{scale}")
    return gen(rng, scale)
