"""Memory partitions: L2 slices per sub-partition and one DRAM channel each.

Each memory partition holds ``sub_partitions_per_partition`` sub-partitions
(two by default), each owning one equal slice of the L2.  The L2 is
write-back / write-allocate with LRU replacement; dirty victims are counted
but their write traffic is not timed.  A miss to a line whose fetch is
already outstanding waits in that line's MSHR entry instead of fetching
again.  DRAM is a single fixed-latency
service slot per partition fed by a bounded FIFO.

Lines are interleaved over sub-partitions by plain modulo of the line
number.  That hash is a modelling choice, not a published one.

All functions here run only in the engine's sequential phases.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .cache import LruCache
from .config import GpuConfig, derived_geometry
from .packet import LOAD_RESP, STORE_REQ, Packet
from .stats import empty_memory_counters


@dataclass(frozen=True)
class AddressMap:
    line_bytes: int
    num_sub_partitions: int

    def sub_partition(self, addr: int) -> int:
        return (addr // self.line_bytes) % self.num_sub_partitions


def map_address(am: AddressMap, addr: int) -> int:
    return am.sub_partition(addr)


class SubPartition:
    def __init__(self, sp_id: int, partition: MemPartition, l2: LruCache, hit_latency: int, inbox_capacity: int):
        self.id = sp_id
        self.partition = partition
        self.l2 = l2
        self.hit_latency = hit_latency
        self.inbox_capacity = inbox_capacity
        self.inbox: deque[Packet] = deque()
        self.outbox: list[Packet] = []
        self.hit_pipeline: deque[tuple[int, Packet]] = deque()  # (ready_cycle, response)
        self.fills: list[Packet] = []
        self.mshr: dict[int, list[Packet]] = {}  # line -> requests waiting on its fetch
        self.counters = empty_memory_counters()

    def is_idle(self) -> bool:
        return not (self.inbox or self.outbox or self.hit_pipeline or self.fills or self.mshr)

    def packets_held(self) -> int:
        """Packets parked here; a line's first waiter is counted where its fetch is."""
        merged = sum(len(w) - 1 for w in self.mshr.values())
        return len(self.inbox) + len(self.outbox) + len(self.hit_pipeline) + len(self.fills) + merged


class MemPartition:
    def __init__(self, mp_id: int, dram_latency: int, queue_capacity: int):
        self.id = mp_id
        self.dram_latency = dram_latency
        self.queue_capacity = queue_capacity
        self.sub_partitions: list[SubPartition] = []
        self.dram_queue: deque[Packet] = deque()
        self.in_service: Packet | None = None
        self.remaining = 0
        self.counters = empty_memory_counters()

    def is_idle(self) -> bool:
        return self.in_service is None and not self.dram_queue

    def packets_held(self) -> int:
        return len(self.dram_queue) + (self.in_service is not None)


def build_memory(cfg: GpuConfig) -> tuple[list[MemPartition], list[SubPartition]]:
    geo = derived_geometry(cfg)
    partitions = []
    subs = []
    for p in range(cfg.num_mem_partitions):
        mp = MemPartition(p, cfg.dram_latency, cfg.dram_queue_capacity)
        for _ in range(cfg.sub_partitions_per_partition):
            l2 = LruCache(geo.l2_slice_sets, cfg.l2_assoc, cfg.l2_line_bytes, index_stride=geo.num_sub_partitions)
            sp = SubPartition(len(subs), mp, l2, cfg.l2_hit_latency, cfg.l2_inbox_capacity)
            mp.sub_partitions.append(sp)
            subs.append(sp)
        partitions.append(mp)
    return partitions, subs


def _respond(pkt: Packet, sp_id: int) -> Packet:
    return Packet(pkt.req_id, LOAD_RESP, sp_id, pkt.src, pkt.addr, pkt.size)


def cache_cycle(sp: SubPartition, cycle: int) -> None:
    """One L2 slice cycle: retire ripe hits, install fills, serve one request."""
    c = sp.counters
    pipe = sp.hit_pipeline
    while pipe and pipe[0][0] <= cycle:
        sp.outbox.append(pipe.popleft()[1])

    if sp.fills:
        for fill in sp.fills:
            waiters = sp.mshr.pop(fill.addr)
            dirty = any(w.kind == STORE_REQ for w in waiters)
            _, victim_dirty = sp.l2.fill(fill.addr, dirty=dirty)
            if victim_dirty:
                c["l2_writebacks"] += 1
            for w in waiters:
                if w.kind == STORE_REQ:
                    c["l2_store_completions"] += 1
                else:
                    sp.outbox.append(_respond(w, sp.id))
                    c["l2_load_responses"] += 1
        sp.fills.clear()

    if not sp.inbox:
        return
    req = sp.inbox[0]
    is_store = req.kind == STORE_REQ
    if sp.l2.lookup(req.addr, write=is_store):
        sp.inbox.popleft()
        c["l2_accesses"] += 1
        c["l2_hits"] += 1
        if is_store:
            c["l2_store_completions"] += 1
        else:
            pipe.append((cycle + sp.hit_latency, _respond(req, sp.id)))
            c["l2_load_responses"] += 1
        return
    waiting = sp.mshr.get(req.addr)
    if waiting is not None:
        sp.inbox.popleft()
        c["l2_accesses"] += 1
        c["l2_mshr_merges"] += 1
        waiting.append(req)
        return
    mp = sp.partition
    if len(mp.dram_queue) >= mp.queue_capacity:
        c["l2_dram_stall_cycles"] += 1  # head-of-line blocked
        return
    sp.inbox.popleft()
    c["l2_accesses"] += 1
    c["l2_misses"] += 1
    sp.mshr[req.addr] = [req]
    mp.dram_queue.append(req)


def dram_cycle(mp: MemPartition) -> Packet | None:
    """Advance the partition's DRAM channel one cycle.

    Returns the request whose fill was delivered this cycle, if any.  A
    request entering service at cycle ``t`` is delivered at ``t + latency``;
    the next queued request enters service the same cycle.
    """
    done = None
    if mp.in_service is not None:
        mp.remaining -= 1
        if mp.remaining == 0:
            done = mp.in_service
            local = done.dst - mp.sub_partitions[0].id
            mp.sub_partitions[local].fills.append(done)
            mp.in_service = None
    if mp.in_service is None and mp.dram_queue:
        mp.in_service = mp.dram_queue.popleft()
        mp.remaining = mp.dram_latency
        mp.counters["dram_accesses"] += 1
    return done


def memory_counters(partitions: list[MemPartition]) -> dict[str, int]:
    """Sum per-partition and per-slice counters in ascending id order."""
    total = empty_memory_counters()
    for mp in partitions:
        for k, v in mp.counters.items():
            total[k] += v
        for sp in mp.sub_partitions:
            for k, v in sp.counters.items():
                total[k] += v
    return total


def reset_memory_counters(partitions: list[MemPartition]) -> None:
    for mp in partitions:
        mp.counters = empty_memory_counters()
        for sp in mp.sub_partitions:
            sp.counters = empty_memory_counters()


def l2_oracle_check(
    requests: list[tuple[int, bool]],
    num_sets: int,
    assoc: int,
    line_bytes: int,
    index_stride: int = 1,
    write_allocate: bool = True,
) -> list[bool]:
    """Reference hit/miss sequence for ``(addr, is_write)`` requests.

    Independent of :class:`LruCache`: each set is a dict of line -> last use
    time and the victim is the minimum timestamp.  Set ``write_allocate`` to
    False for the L1D's no-write-allocate policy.
    """
    sets: list[dict[int, int]] = [{} for _ in range(num_sets)]
    out = []
    for t, (addr, is_write) in enumerate(requests):
        line = addr // line_bytes
        ways = sets[(line // index_stride) % num_sets]
        if line in ways:
            ways[line] = t
            out.append(True)
            continue
        out.append(False)
        if is_write and not write_allocate:
            continue
        if len(ways) >= assoc:
            del ways[min(ways, key=ways.__getitem__)]
        ways[line] = t
    return out

