"""One Streaming Multiprocessor.

An SM is split into sub-cores; hardware warp slot ``s`` belongs to sub-core
``s % sub_cores_per_sm`` for as long as the warp lives.  Each sub-core
issues at most one instruction per cycle, choosing loose round-robin among
its Ready warps.  Warps are strictly in-order:

* ALU ``n``: busy for ``n`` cycles (the issuing cycle counts as the first).
* LD: L1D hit costs ``l1_hit_latency`` cycles; a miss parks the warp until
  the response arrives.  Misses to a line that is already outstanding merge
  into the existing request.
* ST: write-through, no-write-allocate; always sends a request, never
  stalls the warp beyond its issue cycle.
* BAR: waits for every live warp of the CTA.
* EXIT: retires the warp; the CTA's slots free when its last warp exits.

Instruction fetch is ideal and only counted.

:func:`sm_cycle` reads and writes nothing but the SM it is given (and its
stat sheet), plus read-only inputs.  Responses arrive through ``inbox`` and
requests leave through ``outbox``; both are touched by the interconnect only
in the engine's sequential phases.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass, field

from .cache import LruCache
from .config import GpuConfig, derived_geometry
from .packet import LOAD_REQ, STORE_REQ, Packet
from .stats import Counter, StatSheet
from .trace import ALU, BAR, LD, ST, CtaTrace

READY = 0
EXEC = 1
WAIT_MEM = 2
WAIT_BAR = 3
FINISHED = 4
STATE_NAMES = ("Ready", "ExecLatency", "WaitMem", "WaitBarrier", "Finished")

_ALU = int(Counter.INSTRUCTIONS_ALU)
_LD = int(Counter.INSTRUCTIONS_LD)
_ST = int(Counter.INSTRUCTIONS_ST)
_BAR = int(Counter.INSTRUCTIONS_BAR)
_EXIT = int(Counter.INSTRUCTIONS_EXIT)
_L1_HITS = int(Counter.L1_HITS)
_L1_MISSES = int(Counter.L1_MISSES)
_L1_MERGES = int(Counter.L1_MSHR_MERGES)
_ACTIVE = int(Counter.ACTIVE_CYCLES)
_ISSUED_CTAS = int(Counter.ISSUED_CTAS)
_STALL_MEM = int(Counter.STALL_CYCLES_MEM)
_STALL_EXEC = int(Counter.STALL_CYCLES_EXEC)
_L0I = int(Counter.L0I_ACCESSES)


class WarpContext:
    __slots__ = (
        "global_warp_id", "slot", "cta_slot", "instructions", "pc_index", "state", "remaining", "wait_line", "sc",
    )

    def __init__(self, global_warp_id: tuple[int, int, int], slot: int, cta_slot: int, instructions: tuple, sc=None):
        self.global_warp_id = global_warp_id  # (kernel, cta, warp)
        self.slot = slot
        self.cta_slot = cta_slot
        self.instructions = instructions
        self.pc_index = 0
        self.state = READY
        self.remaining = 0
        self.wait_line = -1
        self.sc = sc  # owning SubCore

    def __repr__(self) -> str:
        return f"WarpContext({self.global_warp_id}, slot={self.slot}, pc={self.pc_index}, {STATE_NAMES[self.state]})"


@dataclass
class ResidentCta:
    kernel_idx: int
    cta_id: int
    warp_slots: list[int]
    live: int
    arrived: int = 0


@dataclass
class SubCore:
    """Issue scheduler state for one sub-core.

    ``slots`` are the hardware warp slots the sub-core owns; ``members`` the
    currently occupied ones, ascending.  ``issue_pointer`` is the slot the
    next round-robin scan starts from.  ``ready``, ``waiting_mem`` and
    ``live`` count member warps by state so a stalled sub-core is classified
    without a scan.
    """

    id: int
    slots: tuple[int, ...]
    members: list[int] = field(default_factory=list)
    issue_pointer: int = 0
    ready: int = 0
    waiting_mem: int = 0
    live: int = 0


class SmState:
    def __init__(self, sm_id: int, cfg: GpuConfig):
        geo = derived_geometry(cfg)
        self.sm_id = sm_id
        self.warps: list[WarpContext | None] = [None] * cfg.warps_per_sm
        self.ctas: list[ResidentCta | None] = [None] * cfg.max_ctas_per_sm
        n = cfg.sub_cores_per_sm
        self.sub_cores = [SubCore(i, tuple(range(i, cfg.warps_per_sm, n))) for i in range(n)]
        self.num_sub_cores = n
        self.l1 = LruCache(geo.l1d_sets, cfg.l1d_assoc, cfg.l1d_line_bytes)
        self.line_mask = ~(cfg.l1d_line_bytes - 1)
        self.pending: dict[int, list[int]] = {}  # line addr -> waiting warp slots
        self.busy: list[WarpContext] = []  # warps in ExecLatency
        self.inbox: list[Packet] = []
        self.outbox: list[Packet] = []
        self.stat_sheet = StatSheet()
        self.resident_warps = 0
        self.resident_ctas = 0
        self.cycle = 0
        self.seq = 0

    @property
    def free_warp_slots(self) -> int:
        return len(self.warps) - self.resident_warps

    @property
    def free_cta_slots(self) -> int:
        return len(self.ctas) - self.resident_ctas

    def core_idle(self) -> bool:
        return self.resident_warps == 0 and not self.pending


def can_accept(free_warps: int, free_ctas: int, cta_warps: int) -> bool:
    return free_ctas > 0 and free_warps >= cta_warps


def accept_cta(sm: SmState, cta: CtaTrace, kernel_idx: int) -> bool:
    """Install ``cta`` if it fits; otherwise leave the SM untouched."""
    if not can_accept(sm.free_warp_slots, sm.free_cta_slots, len(cta.warps)):
        return False
    cta_slot = sm.ctas.index(None)
    slots = [i for i, w in enumerate(sm.warps) if w is None][: len(cta.warps)]
    for slot, wt in zip(slots, cta.warps):
        sc = sm.sub_cores[slot % sm.num_sub_cores]
        sm.warps[slot] = WarpContext((kernel_idx, cta.cta_id, wt.warp_id), slot, cta_slot, wt.instructions, sc)
        insort(sc.members, slot)
        sc.ready += 1
        sc.live += 1
    sm.ctas[cta_slot] = ResidentCta(kernel_idx, cta.cta_id, slots, live=len(slots))
    sm.resident_warps += len(slots)
    sm.resident_ctas += 1
    sm.stat_sheet.counters[_ISSUED_CTAS] += 1
    return True


def sm_is_idle(sm: SmState) -> bool:
    return sm.resident_warps == 0 and not sm.inbox and not sm.outbox and not sm.pending


def _release_barrier(sm: SmState, cta: ResidentCta) -> None:
    if cta.arrived and cta.arrived == cta.live:
        warps = sm.warps
        for slot in cta.warp_slots:
            w = warps[slot]
            if w.state == WAIT_BAR:
                w.state = READY
                w.sc.ready += 1
        cta.arrived = 0


def _retire(sm: SmState, w: WarpContext) -> None:
    w.state = FINISHED
    w.sc.live -= 1
    cta = sm.ctas[w.cta_slot]
    cta.live -= 1
    if cta.live == 0:
        for slot in cta.warp_slots:
            sm.warps[slot] = None
            sm.sub_cores[slot % sm.num_sub_cores].members.remove(slot)
        sm.ctas[w.cta_slot] = None
        sm.resident_warps -= len(cta.warp_slots)
        sm.resident_ctas -= 1
    else:
        _release_barrier(sm, cta)


def _emit(sm: SmState, kind: str, line: int, size: int) -> None:
    sm.outbox.append(Packet((sm.sm_id, sm.cycle, sm.seq), kind, sm.sm_id, -1, line, size))
    sm.seq += 1


def sm_cycle(sm: SmState, program, cfg: GpuConfig) -> None:
    """Advance ``sm`` by exactly one core cycle."""
    if sm.resident_warps == 0 and not sm.inbox:
        sm.cycle += 1
        sm.seq = 0
        return
    sheet = sm.stat_sheet
    c = sheet.counters
    c[_ACTIVE] += 1
    warps = sm.warps

    # 1. responses: fill L1, wake every warp merged on the line
    if sm.inbox:
        for pkt in sm.inbox:
            sm.l1.fill(pkt.addr)
            for slot in sm.pending.pop(pkt.addr):
                w = warps[slot]
                w.state = READY
                w.sc.waiting_mem -= 1
                w.sc.ready += 1
        sm.inbox.clear()

    # 2. issue, one instruction per sub-core, loose round-robin
    busy = sm.busy
    nsub = sm.num_sub_cores
    for sc in sm.sub_cores:
        if not sc.ready:
            if sc.waiting_mem:
                c[_STALL_MEM] += 1
            elif sc.live:
                c[_STALL_EXEC] += 1
            continue
        members = sc.members
        n = len(members)
        start = bisect_left(members, sc.issue_pointer)
        for k in range(n):
            j = start + k
            if j >= n:
                j -= n
            w = warps[members[j]]
            if w.state == READY:
                break
        sc.issue_pointer = w.slot + nsub
        sc.ready -= 1

        ins = w.instructions[w.pc_index]
        w.pc_index += 1
        c[_L0I] += 1
        kind = ins.kind
        if kind == ALU:
            c[_ALU] += 1
            w.state = EXEC
            w.remaining = ins.latency
            busy.append(w)
        elif kind == LD:
            c[_LD] += 1
            line = ins.addr & sm.line_mask
            sheet.unique_lines.add(line)
            if sm.l1.lookup(line):
                c[_L1_HITS] += 1
                w.state = EXEC
                w.remaining = cfg.l1_hit_latency
                busy.append(w)
            else:
                waiting = sm.pending.get(line)
                if waiting is not None:
                    c[_L1_MERGES] += 1
                    waiting.append(w.slot)
                else:
                    c[_L1_MISSES] += 1
                    sm.pending[line] = [w.slot]
                    _emit(sm, LOAD_REQ, line, ins.size)
                w.state = WAIT_MEM
                w.wait_line = line
                sc.waiting_mem += 1
        elif kind == ST:
            c[_ST] += 1
            line = ins.addr & sm.line_mask
            sheet.unique_lines.add(line)
            sm.l1.lookup(line)  # write-through: refresh recency on a hit
            _emit(sm, STORE_REQ, line, ins.size)
            w.state = EXEC
            w.remaining = 1
            busy.append(w)
        elif kind == BAR:
            c[_BAR] += 1
            w.state = WAIT_BAR
            cta = sm.ctas[w.cta_slot]
            cta.arrived += 1
            _release_barrier(sm, cta)
        else:
            c[_EXIT] += 1
            _retire(sm, w)

    # 3. count down execution latencies
    if busy:
        still = []
        for w in busy:
            w.remaining -= 1
            if w.remaining:
                still.append(w)
            else:
                w.state = READY
                w.sc.ready += 1
        sm.busy = still

    sm.cycle += 1
    sm.seq = 0


def install_check(sm: SmState) -> None:
    """Structural self-check used by tests."""
    assert sm.resident_warps == sum(w is not None for w in sm.warps)
    assert sm.resident_ctas == sum(c is not None for c in sm.ctas)
    for w in sm.warps:
        if w is not None:
            assert w.pc_index <= len(w.instructions)
            assert (w.state == FINISHED) == (w.pc_index == len(w.instructions))
    for sc in sm.sub_cores:
        states = [sm.warps[s].state for s in sc.members]
        assert sc.ready == states.count(READY)
        assert sc.waiting_mem == states.count(WAIT_MEM)
        assert sc.live == len(states) - states.count(FINISHED)

