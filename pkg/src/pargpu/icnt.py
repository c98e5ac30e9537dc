"""Fixed-latency interconnect between SMs and memory sub-partitions.

Two directions, one FIFO per destination.  A packet becomes deliverable
``icnt_latency_cycles`` after injection and at most
``icnt_bw_per_dest_per_cycle`` packets leave a queue per cycle.  All
arbitration walks sources and destinations in ascending id, so the order
packets travel in depends only on what was injected, never on which worker
cycled which SM.

Anything with ``inbox`` and ``outbox`` lists can stand in for an SM here;
the process backend passes lightweight proxies.
"""

from __future__ import annotations

from collections import deque

from .memsys import AddressMap
from .packet import Packet


class IcntState:
    def __init__(self, num_sms: int, amap: AddressMap, latency: int, bandwidth: int):
        self.latency = latency
        self.bandwidth = bandwidth
        self.amap = amap
        num_sub_partitions = amap.num_sub_partitions
        self.toward_mem: list[deque[Packet]] = [deque() for _ in range(num_sub_partitions)]
        self.toward_sm: list[deque[Packet]] = [deque() for _ in range(num_sms)]
        self.mem_dsts: set[int] = set()  # sub-partitions with a non-empty toward_mem queue
        self.next_seq = 0
        self.injected_mem = 0
        self.delivered_mem = 0
        self.injected_sm = 0
        self.delivered_sm = 0

    @classmethod
    def from_config(cls, cfg) -> IcntState:
        return cls(
            cfg.num_sms,
            AddressMap(cfg.l2_line_bytes, cfg.num_sub_partitions),
            cfg.icnt_latency_cycles,
            cfg.icnt_bw_per_dest_per_cycle,
        )

    def queued_mem(self) -> int:
        return sum(len(q) for q in self.toward_mem)

    def queued_sm(self) -> int:
        return sum(len(q) for q in self.toward_sm)

    def in_flight(self) -> int:
        return (self.injected_mem - self.delivered_mem) + (self.injected_sm - self.delivered_sm)

    def check_conservation(self) -> None:
        if self.injected_mem != self.delivered_mem + self.queued_mem():
            raise AssertionError(
                f"toward_mem: injected {self.injected_mem} != delivered {self.delivered_mem} + queued {self.queued_mem()}"
            )
        if self.injected_sm != self.delivered_sm + self.queued_sm():
            raise AssertionError(
                f"toward_sm: injected {self.injected_sm} != delivered {self.delivered_sm} + queued {self.queued_sm()}"
            )


def icnt_schedule(ic: IcntState, sms, cycle: int) -> int:
    """Drain every SM outbox, ascending SM id, into the memory-bound queues."""
    n = 0
    amap = ic.amap
    for sm in sms:
        if not sm.outbox:
            continue
        for pkt in sm.outbox:
            pkt.dst = amap.sub_partition(pkt.addr)
            pkt.inject_cycle = cycle
            pkt.seq = ic.next_seq
            ic.next_seq += 1
            ic.toward_mem[pkt.dst].append(pkt)
            ic.mem_dsts.add(pkt.dst)
            n += 1
        sm.outbox.clear()
    ic.injected_mem += n
    return n


def icnt_to_mem_one(ic: IcntState, sp, cycle: int) -> int:
    q = ic.toward_mem[sp.id]
    moved = 0
    ripe = cycle - ic.latency
    while q and moved < ic.bandwidth and q[0].inject_cycle <= ripe:
        if len(sp.inbox) >= sp.inbox_capacity:
            break
        sp.inbox.append(q.popleft())
        moved += 1
    ic.delivered_mem += moved
    return moved


def icnt_to_mem(ic: IcntState, sub_partitions, cycle: int) -> int:
    moved = sum(icnt_to_mem_one(ic, sp, cycle) for sp in sub_partitions)
    ic.mem_dsts = {d for d in ic.mem_dsts if ic.toward_mem[d]}
    return moved


def mem_to_icnt(ic: IcntState, sub_partitions, cycle: int) -> int:
    """Drain sub-partition outboxes, ascending id, into the SM-bound queues."""
    n = 0
    for sp in sub_partitions:
        if not sp.outbox:
            continue
        for pkt in sp.outbox:
            pkt.inject_cycle = cycle
            pkt.seq = ic.next_seq
            ic.next_seq += 1
            ic.toward_sm[pkt.dst].append(pkt)
            n += 1
        sp.outbox.clear()
    ic.injected_sm += n
    return n


def icnt_to_sm(ic: IcntState, sms, cycle: int) -> int:
    if ic.injected_sm == ic.delivered_sm:
        return 0
    ripe = cycle - ic.latency
    bw = ic.bandwidth
    total = 0
    for sm, q in zip(sms, ic.toward_sm):
        moved = 0
        while q and moved < bw and q[0].inject_cycle <= ripe:
            sm.inbox.append(q.popleft())
            moved += 1
        total += moved
    ic.delivered_sm += total
    return total
