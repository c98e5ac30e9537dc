"""Packets exchanged between SMs and memory sub-partitions."""

from __future__ import annotations

from dataclasses import dataclass

LOAD_REQ = "LoadReq"
STORE_REQ = "StoreReq"
LOAD_RESP = "LoadResp"
FILL = "Fill"


@dataclass(slots=True)
class Packet:
    """A request or response in flight.

    ``req_id`` is ``(sm_id, sm_cycle, seq)``: unique, and assigned by the
    emitting SM from its own state only.  ``dst`` is a sub-partition id for
    requests (set when the packet enters the network) and an SM id for
    responses.
    """

    req_id: tuple[int, int, int]
    kind: str
    src: int
    dst: int
    addr: int
    size: int
    inject_cycle: int = -1
    seq: int = -1  # global injection order, stamped by the network
