"""Simulation driver.

One call to :func:`cycle` runs these phases in order::

    icnt_to_sm -> mem_to_icnt -> dram -> icnt_to_mem -> cache
        -> icnt_schedule -> SM loop -> gpu_cycle += 1 -> issue CTAs

Only the SM loop is parallel.  It is also the only phase that touches SM
state, and an SM's cycle touches nothing else, so the order in which
workers visit SMs cannot change what gets simulated.  Requests an SM emits
wait in its outbox until the next cycle's ``icnt_schedule`` drains all
outboxes in ascending SM id.  That buffering is what makes every schedule
and worker count produce bit-identical results.

Two SM hosts implement the loop:

* :class:`LocalSmHost` keeps every ``SmState`` in this process and runs
  the loop through :func:`pargpu.parallel.parallel_for_sms` on a thread
  team (seq / static / dynamic).
* :class:`ProcessSmHost` partitions SMs statically over worker processes.
  Each process owns its SMs for the whole run; per cycle it receives the
  SMs' inbox packets and newly placed CTAs and returns their outboxes plus
  a small occupancy summary.  The calling process owns worker 0's share.
"""

from __future__ import annotations

import multiprocessing as mp
import time
import traceback
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from . import smcore
from .config import GpuConfig
from .icnt import IcntState, icnt_schedule, icnt_to_mem_one, icnt_to_sm, mem_to_icnt
from .memsys import build_memory, cache_cycle, dram_cycle, memory_counters, reset_memory_counters
from .parallel import PROCESS, SEQ, SchedulePolicy, WorkerTeam, parallel_for_sms, static_assignment
from .stats import Counter, GpuStats, KernelReport, StatSheet, empty_memory_counters, reduce
from .trace import CtaTrace, TraceProgram, validate_program

PHASES = (
    "setup",
    "icnt_to_sm",
    "mem_to_icnt",
    "dram",
    "icnt_to_mem",
    "cache",
    "icnt_schedule",
    "sm",
    "gpu_cycle",
    "issue",
    "done_check",
    "kernel_boundary",
)


class InvariantError(RuntimeError):
    """A conservation or bookkeeping identity failed during simulation."""


@dataclass
class PhaseProfile:
    seconds: dict[str, float] = field(default_factory=dict)
    wall_seconds: float = 0.0
    cycles: int = 0

    @property
    def total(self) -> float:
        return sum(self.seconds.values())

    def shares(self) -> dict[str, float]:
        tot = self.total
        if tot <= 0.0:
            return {}
        return {k: v / tot for k, v in self.seconds.items()}

    @property
    def sm_share(self) -> float:
        return self.shares().get("sm", 0.0)

    def render(self) -> str:
        shares = self.shares()
        lines = [f"cycles = {self.cycles}", f"wall_seconds = {self.wall_seconds:.6f}"]
        for k, v in self.seconds.items():
            lines.append(f"phase.{k}.seconds = {v:.6f}")
            lines.append(f"phase.{k}.share = {shares.get(k, 0.0):.4f}")
        return "\n".join(lines) + "\n"


class RunResult(NamedTuple):
    stats: GpuStats
    profile: PhaseProfile


# --------------------------------------------------------------------------
# SM hosts


class LocalSmHost:
    def __init__(self, cfg: GpuConfig, program: TraceProgram, policy: SchedulePolicy):
        self.cfg = cfg
        self.program = program
        self.policy = policy
        self.sms = [smcore.SmState(i, cfg) for i in range(cfg.num_sms)]
        self.ports = self.sms
        self.team = WorkerTeam(policy.workers) if policy.team_size > 1 else None
        self.plan = static_assignment(cfg.num_sms, policy.workers, policy.chunk) if policy.team_size > 1 else None

    def run_sm_phase(self) -> None:
        program, cfg = self.program, self.cfg

        def body(sm: smcore.SmState) -> None:
            smcore.sm_cycle(sm, program, cfg)

        parallel_for_sms(self.sms, self.policy, body, self.team, self.plan)

    def accept(self, i: int, cta: CtaTrace, kernel_idx: int) -> bool:
        return smcore.accept_cta(self.sms[i], cta, kernel_idx)

    def is_idle(self, i: int) -> bool:
        return smcore.sm_is_idle(self.sms[i])

    def all_idle(self) -> bool:
        return all(smcore.sm_is_idle(sm) for sm in self.sms)

    def take_sheets(self) -> list[StatSheet]:
        out = []
        for sm in self.sms:
            out.append(sm.stat_sheet)
            sm.stat_sheet = StatSheet()
        return out

    def close(self) -> None:
        if self.team is not None:
            self.team.close()


class SmProxy:
    """Mailbox stand-in for an SM living in another process."""

    __slots__ = ("sm_id", "inbox", "outbox", "installs", "free_warps", "free_ctas", "core_idle")

    def __init__(self, sm_id: int, cfg: GpuConfig):
        self.sm_id = sm_id
        self.inbox: list = []
        self.outbox: list = []
        self.installs: list[tuple[int, int]] = []
        self.free_warps = cfg.warps_per_sm
        self.free_ctas = cfg.max_ctas_per_sm
        self.core_idle = True

    def accept(self, cta: CtaTrace, kernel_idx: int) -> bool:
        if not smcore.can_accept(self.free_warps, self.free_ctas, len(cta.warps)):
            return False
        self.installs.append((kernel_idx, cta.cta_id))
        self.free_warps -= len(cta.warps)
        self.free_ctas -= 1
        self.core_idle = False
        return True

    def is_idle(self) -> bool:
        return self.core_idle and not (self.inbox or self.outbox or self.installs)


def _summary(sm: smcore.SmState) -> tuple[int, int, bool]:
    return sm.free_warp_slots, sm.free_cta_slots, sm.core_idle()


def _process_worker(conn, cfg: GpuConfig, program: TraceProgram, sm_ids: list[int]) -> None:
    try:
        sms = {i: smcore.SmState(i, cfg) for i in sm_ids}
        last = {i: _summary(sms[i]) for i in sm_ids}
        while True:
            msg = conn.recv()
            op = msg[0]
            if op == "cycle":
                for sm_id, installs, inbox in msg[1]:
                    sm = sms[sm_id]
                    for kidx, cta_id in installs:
                        if not smcore.accept_cta(sm, program.kernels[kidx].ctas[cta_id], kidx):
                            raise InvariantError(f"SM {sm_id} refused a CTA the engine placed")
                    sm.inbox.extend(inbox)
                reply = []
                for sm_id in sm_ids:
                    sm = sms[sm_id]
                    smcore.sm_cycle(sm, program, cfg)
                    summ = _summary(sm)
                    if sm.outbox or summ != last[sm_id]:
                        reply.append((sm_id, sm.outbox, *summ))
                        sm.outbox = []
                        last[sm_id] = summ
                conn.send(("ok", reply))
            elif op == "sheets":
                out = {}
                for sm_id in sm_ids:
                    out[sm_id] = sms[sm_id].stat_sheet
                    sms[sm_id].stat_sheet = StatSheet()
                conn.send(("ok", out))
            elif op == "stop":
                conn.send(("ok", None))
                return
    except BaseException:
        conn.send(("error", traceback.format_exc()))
    finally:
        conn.close()


def _mp_context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


class ProcessSmHost:
    def __init__(self, cfg: GpuConfig, program: TraceProgram, policy: SchedulePolicy):
        self.cfg = cfg
        self.program = program
        self.plan = static_assignment(cfg.num_sms, policy.workers, policy.chunk)
        self.local_ids = self.plan[0]
        self.local = {i: smcore.SmState(i, cfg) for i in self.local_ids}
        self.ports: list = [self.local[i] if i in self.local else SmProxy(i, cfg) for i in range(cfg.num_sms)]
        ctx = _mp_context()
        self.workers = []
        for ids in self.plan[1:]:
            if not ids:
                continue
            parent, child = ctx.Pipe()
            proc = ctx.Process(target=_process_worker, args=(child, cfg, program, ids), daemon=True)
            proc.start()
            child.close()
            self.workers.append((proc, parent, ids))

    def _recv(self, conn):
        status, payload = conn.recv()
        if status != "ok":
            raise RuntimeError(f"SM worker process failed:\n{payload}")
        return payload

    def run_sm_phase(self) -> None:
        ports = self.ports
        for _, conn, ids in self.workers:
            deliveries = []
            for i in ids:
                px = ports[i]
                if px.inbox or px.installs:
                    deliveries.append((i, px.installs, px.inbox))
                    px.installs = []
                    px.inbox = []
            conn.send(("cycle", deliveries))
        program, cfg = self.program, self.cfg
        for i in self.local_ids:
            smcore.sm_cycle(self.local[i], program, cfg)
        for _, conn, _ in self.workers:
            for sm_id, outbox, free_warps, free_ctas, core_idle in self._recv(conn):
                px = ports[sm_id]
                px.outbox = outbox
                px.free_warps = free_warps
                px.free_ctas = free_ctas
                px.core_idle = core_idle

    def accept(self, i: int, cta: CtaTrace, kernel_idx: int) -> bool:
        port = self.ports[i]
        if i in self.local:
            return smcore.accept_cta(port, cta, kernel_idx)
        return port.accept(cta, kernel_idx)

    def is_idle(self, i: int) -> bool:
        port = self.ports[i]
        if i in self.local:
            return smcore.sm_is_idle(port)
        return port.is_idle()

    def all_idle(self) -> bool:
        return all(self.is_idle(i) for i in range(len(self.ports)))

    def take_sheets(self) -> list[StatSheet]:
        sheets: dict[int, StatSheet] = {}
        for _, conn, _ in self.workers:
            conn.send(("sheets",))
        for i, sm in self.local.items():
            sheets[i] = sm.stat_sheet
            sm.stat_sheet = StatSheet()
        for _, conn, _ in self.workers:
            sheets.update(self._recv(conn))
        return [sheets[i] for i in range(len(self.ports))]

    def close(self) -> None:
        for proc, conn, _ in self.workers:
            try:
                conn.send(("stop",))
                conn.recv()
            except (OSError, EOFError):
                pass
            conn.close()
            proc.join(timeout=5)
            if proc.is_alive():
                proc.terminate()
        self.workers = []


def make_host(cfg: GpuConfig, program: TraceProgram, policy: SchedulePolicy):
    if policy.backend == PROCESS and policy.kind != SEQ and policy.workers > 1:
        return ProcessSmHost(cfg, program, policy)
    return LocalSmHost(cfg, program, policy)


# --------------------------------------------------------------------------
# engine state and phases


class EngineState:
    def __init__(self, cfg: GpuConfig, program: TraceProgram, policy: SchedulePolicy):
        self.cfg = cfg
        self.program = program
        self.policy = policy
        self.host = make_host(cfg, program, policy)
        self.icnt = IcntState.from_config(cfg)
        self.partitions, self.sub_partitions = build_memory(cfg)
        self.gpu_cycle = 0
        self.kernel_idx = -1
        self.pending_ctas: deque[CtaTrace] = deque()
        self.issue_pointer = 0
        self.placement_log: list[tuple[int, int, int, int]] = []  # (kernel, cta, sm, cycle)
        self.timers = dict.fromkeys(PHASES, 0.0)
        self.audit = False
        # memory-side work lists; visiting them sorted keeps ascending-id order
        self.active_sps: set[int] = set()  # slices with inbox, fills or hits in flight
        self.sps_with_output: list = []  # slices whose outbox the next mem_to_icnt drains

    @property
    def sms(self):
        return self.host.ports

    def memory_idle(self) -> bool:
        return all(mp.is_idle() for mp in self.partitions) and all(sp.is_idle() for sp in self.sub_partitions)

    def kernel_done(self) -> bool:
        return (
            not self.pending_ctas
            and self.icnt.in_flight() == 0
            and self.memory_idle()
            and self.host.all_idle()
        )

    def close(self) -> None:
        self.host.close()


def issue_blocks_to_sms(st: EngineState) -> int:
    """Round-robin CTA placement starting at ``issue_pointer``."""
    issued = 0
    n = st.cfg.num_sms
    host = st.host
    while st.pending_ctas:
        cta = st.pending_ctas[0]
        for k in range(n):
            i = st.issue_pointer + k
            if i >= n:
                i -= n
            if host.accept(i, cta, st.kernel_idx):
                st.pending_ctas.popleft()
                st.placement_log.append((st.kernel_idx, cta.cta_id, i, st.gpu_cycle))
                st.issue_pointer = i + 1 if i + 1 < n else 0
                issued += 1
                break
        else:
            break
    return issued


def cycle(st: EngineState) -> None:
    now = time.perf_counter
    timers = st.timers
    ic = st.icnt
    ports = st.host.ports
    subs = st.sub_partitions
    cyc = st.gpu_cycle

    active = st.active_sps

    t0 = now()
    icnt_to_sm(ic, ports, cyc)
    t1 = now()
    if st.sps_with_output:
        mem_to_icnt(ic, st.sps_with_output, cyc)
        st.sps_with_output = []
    t2 = now()
    for mpart in st.partitions:
        if mpart.in_service is not None or mpart.dram_queue:
            done = dram_cycle(mpart)
            if done is not None:
                active.add(done.dst)
    t3 = now()
    if ic.mem_dsts:
        for d in sorted(ic.mem_dsts):
            if icnt_to_mem_one(ic, subs[d], cyc):
                active.add(d)
            if not ic.toward_mem[d]:
                ic.mem_dsts.discard(d)
    t4 = now()
    if active:
        out = st.sps_with_output
        for d in sorted(active):
            sp = subs[d]
            cache_cycle(sp, cyc)
            if sp.outbox:
                out.append(sp)
            if not (sp.inbox or sp.fills or sp.hit_pipeline):
                active.discard(d)
    t5 = now()
    icnt_schedule(ic, ports, cyc)
    t6 = now()
    st.host.run_sm_phase()
    t7 = now()
    st.gpu_cycle += 1
    t8 = now()
    if st.pending_ctas:
        issue_blocks_to_sms(st)
    t9 = now()

    timers["icnt_to_sm"] += t1 - t0
    timers["mem_to_icnt"] += t2 - t1
    timers["dram"] += t3 - t2
    timers["icnt_to_mem"] += t4 - t3
    timers["cache"] += t5 - t4
    timers["icnt_schedule"] += t6 - t5
    timers["sm"] += t7 - t6
    timers["gpu_cycle"] += t8 - t7
    timers["issue"] += t9 - t8

    if st.audit:
        ic.check_conservation()


def _instructions(sheets: list[StatSheet]) -> int:
    return sum(s.instructions for s in sheets)


def _check_kernel_end(st: EngineState, kernel, sheets: list[StatSheet], mem: dict[str, int]) -> None:
    executed = _instructions(sheets)
    if executed != kernel.num_instructions:
        raise InvariantError(
            f"kernel {kernel.name}: executed {executed} instructions, trace holds {kernel.num_instructions}"
        )
    if st.icnt.in_flight() or not st.memory_idle():
        raise InvariantError(f"kernel {kernel.name}: packets still in flight at kernel boundary")
    load_misses = sum(s.counters[Counter.L1_MISSES] for s in sheets)
    stores = sum(s.counters[Counter.INSTRUCTIONS_ST] for s in sheets)
    if mem["l2_load_responses"] != load_misses or mem["l2_store_completions"] != stores:
        raise InvariantError(
            f"kernel {kernel.name}: request conservation broken "
            f"(responses {mem['l2_load_responses']} vs misses {load_misses}, "
            f"store completions {mem['l2_store_completions']} vs stores {stores})"
        )


def simulate(st: EngineState) -> RunResult:
    """Run every kernel of ``st.program`` to completion."""
    now = time.perf_counter
    timers = st.timers
    cfg = st.cfg
    totals = [StatSheet() for _ in range(cfg.num_sms)]
    total_mem = empty_memory_counters()
    kernel_reports = []
    icnt_mark = (0, 0)
    wall0 = now()

    for kidx, kernel in enumerate(st.program.kernels):
        t = now()
        st.kernel_idx = kidx
        st.pending_ctas = deque(kernel.ctas)
        st.issue_pointer = 0
        start_cycle = st.gpu_cycle
        timers["kernel_boundary"] += now() - t

        while True:
            t = now()
            done = st.kernel_done()
            timers["done_check"] += now() - t
            if done:
                break
            cycle(st)

        t = now()
        sheets = st.host.take_sheets()
        mem = memory_counters(st.partitions)
        reset_memory_counters(st.partitions)
        mem["icnt_packets_to_mem"] = st.icnt.injected_mem - icnt_mark[0]
        mem["icnt_packets_to_sm"] = st.icnt.injected_sm - icnt_mark[1]
        icnt_mark = (st.icnt.injected_mem, st.icnt.injected_sm)
        _check_kernel_end(st, kernel, sheets, mem)
        ks = reduce(sheets, mem, st.gpu_cycle - start_cycle)
        kernel_reports.append(KernelReport(kernel.name, ks.cycles, ks.totals, ks.memory, ks.unique_line_count))
        for acc, sheet in zip(totals, sheets):
            acc.merge(sheet)
        for k, v in mem.items():
            total_mem[k] += v
        timers["kernel_boundary"] += now() - t

    gs = reduce(totals, total_mem, st.gpu_cycle)
    gs = GpuStats(gs.cycles, gs.totals, gs.memory, gs.unique_line_count, gs.per_sm, tuple(kernel_reports))
    wall = now() - wall0
    return RunResult(gs, PhaseProfile(dict(timers), wall, st.gpu_cycle))


def build_engine(cfg: GpuConfig, program: TraceProgram, policy: SchedulePolicy | None = None) -> EngineState:
    validate_program(program, cfg)
    return EngineState(cfg, program, policy or SchedulePolicy.sequential())


def run(
    cfg: GpuConfig,
    program: TraceProgram,
    policy: SchedulePolicy | None = None,
    audit: bool = False,
) -> RunResult:
    """Simulate ``program`` on ``cfg``; results do not depend on ``policy``."""
    t0 = time.perf_counter()
    st = build_engine(cfg, program, policy)
    st.audit = audit
    setup = time.perf_counter() - t0
    try:
        result = simulate(st)
    finally:
        st.close()
    result.profile.seconds["setup"] = setup
    result.profile.wall_seconds += setup
    if result.profile.cycles == 0:
        return RunResult(result.stats, PhaseProfile({}, result.profile.wall_seconds, 0))
    return result


def phase_profile(result: RunResult) -> PhaseProfile:
    return result.profile
