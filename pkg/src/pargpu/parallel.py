"""Parallel-for over SMs with sequential, static and dynamic schedules.

Semantics follow the usual shared-memory loop schedules:

* ``seq``: plain ascending loop on the calling thread.
* ``static``: iteration ``i`` belongs to worker ``(i // chunk) % workers``;
  each worker walks its share in ascending order.
* ``dynamic``: workers claim the next ``chunk`` iterations from a shared
  monotone counter until it runs out.

Every policy runs each iteration exactly once and returns only after all
workers are done.  The calling thread acts as worker 0, so a team of one
runs everything inline.

The thread team gives real parallelism only where the SM body releases the
interpreter lock (free-threaded builds); on a GIL build the process backend
in :mod:`pargpu.engine` is the one that scales.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

SEQ = "seq"
STATIC = "static"
DYNAMIC = "dynamic"
KINDS = (SEQ, STATIC, DYNAMIC)

THREAD = "thread"
PROCESS = "process"
BACKENDS = (THREAD, PROCESS)

WORKERS_ENV = "PARGPU_NUM_WORKERS"


@dataclass(frozen=True)
class SchedulePolicy:
    kind: str = SEQ
    workers: int = 1
    chunk: int = 1
    backend: str = THREAD

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {', '.join(BACKENDS)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")
        if self.backend == PROCESS and self.kind == DYNAMIC:
            raise ValueError("the process backend supports static scheduling only")

    @property
    def team_size(self) -> int:
        return 1 if self.kind == SEQ else self.workers

    def label(self) -> str:
        if self.kind == SEQ:
            return SEQ
        suffix = "" if self.backend == THREAD else f"/{self.backend}"
        return f"{self.kind}-{self.workers}{suffix}"

    @classmethod
    def sequential(cls) -> SchedulePolicy:
        return cls(SEQ, 1)


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


def static_assignment(n: int, workers: int, chunk: int = 1) -> list[list[int]]:
    plan: list[list[int]] = [[] for _ in range(workers)]
    for i in range(n):
        plan[(i // chunk) % workers].append(i)
    return plan


class WorkerTeam:
    """A fixed set of threads that run one function per :meth:`run` call.

    Built once per simulation; per-cycle thread creation would swamp the
    work being measured.  Each helper thread sleeps on its own lock between
    rounds and the last one to finish wakes the caller.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("team size must be >= 1")
        self.size = size
        self._fn: Callable[[int], None] | None = None
        self._go = [threading.Lock() for _ in range(size - 1)]
        for lk in self._go:
            lk.acquire()
        self._done = threading.Lock()
        self._done.acquire()
        self._count_lock = threading.Lock()
        self._outstanding = 0
        self._errors: list[BaseException] = []
        self._closed = False
        self._threads = [
            threading.Thread(target=self._loop, args=(w,), name=f"sm-worker-{w}", daemon=True)
            for w in range(1, size)
        ]
        for t in self._threads:
            t.start()

    def _loop(self, wid: int) -> None:
        go = self._go[wid - 1]
        while True:
            go.acquire()
            fn = self._fn
            if fn is None:
                return
            try:
                fn(wid)
            except BaseException as exc:  # re-raised on the caller
                self._errors.append(exc)
            with self._count_lock:
                self._outstanding -= 1
                last = self._outstanding == 0
            if last:
                self._done.release()

    def run(self, fn: Callable[[int], None]) -> None:
        """Call ``fn(worker_id)`` on every worker; return after all finish."""
        if self._closed:
            raise RuntimeError("team is closed")
        if self.size == 1:
            fn(0)
            return
        self._fn = fn
        self._outstanding = self.size - 1
        for lk in self._go:
            lk.release()
        try:
            fn(0)
        finally:
            self._done.acquire()
            self._fn = None
        if self._errors:
            err = self._errors[0]
            self._errors.clear()
            raise err

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._fn = None
        for lk in self._go:
            lk.release()
        for t in self._threads:
            t.join()

    def __enter__(self) -> WorkerTeam:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ClaimCounter:
    """Shared monotone counter handing out chunk starts."""

    def __init__(self, limit: int, chunk: int):
        self.limit = limit
        self.chunk = chunk
        self._next = 0
        self._lock = threading.Lock()

    def claim(self) -> int | None:
        with self._lock:
            start = self._next
            if start >= self.limit:
                return None
            self._next = start + self.chunk
        return start


def parallel_for_sms(
    sms: Sequence[T],
    policy: SchedulePolicy,
    body: Callable[[T], None],
    team: WorkerTeam | None = None,
    plan: list[list[int]] | None = None,
) -> None:
    """Run ``body(sm)`` once for every element of ``sms`` under ``policy``.

    ``team`` and a precomputed static ``plan`` may be passed to avoid
    rebuilding them every cycle.
    """
    if policy.kind == SEQ or policy.workers == 1:
        for sm in sms:
            body(sm)
        return

    own_team = team is None
    if own_team:
        team = WorkerTeam(policy.workers)
    try:
        if policy.kind == STATIC:
            if plan is None:
                plan = static_assignment(len(sms), policy.workers, policy.chunk)

            def work(wid: int) -> None:
                for i in plan[wid]:
                    body(sms[i])

        else:
            counter = ClaimCounter(len(sms), policy.chunk)
            n = len(sms)

            def work(wid: int) -> None:
                while True:
                    start = counter.claim()
                    if start is None:
                        return
                    for i in range(start, min(start + counter.chunk, n)):
                        body(sms[i])

        team.run(work)
    finally:
        if own_team:
            team.close()
