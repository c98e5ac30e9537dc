"""Set-associative LRU tag store shared by the L1D and the L2 slices."""

from __future__ import annotations


class LruCache:
    """Tag-only set-associative cache with true LRU replacement.

    Lines are identified by line number (``addr // line_bytes``).  The set
    index is ``(line // index_stride) % num_sets``; L2 slices use the
    sub-partition count as stride so the interleave bits do not alias
    onto a handful of sets.

    Each set is a list ordered from LRU (front) to MRU (back).
    """

    __slots__ = ("num_sets", "assoc", "line_bytes", "index_stride", "_shift", "sets", "dirty")

    def __init__(self, num_sets: int, assoc: int, line_bytes: int, index_stride: int = 1):
        self.num_sets = num_sets
        self.assoc = assoc
        self.line_bytes = line_bytes
        self.index_stride = index_stride
        self._shift = line_bytes.bit_length() - 1
        self.sets: list[list[int]] = [[] for _ in range(num_sets)]
        self.dirty: set[int] = set()

    def _set_of(self, line: int) -> list[int]:
        return self.sets[(line // self.index_stride) % self.num_sets]

    def line_of(self, addr: int) -> int:
        return addr >> self._shift

    def contains(self, addr: int) -> bool:
        line = addr >> self._shift
        return line in self._set_of(line)

    def lookup(self, addr: int, write: bool = False) -> bool:
        """Probe and, on a hit, promote to MRU (and mark dirty on write)."""
        line = addr >> self._shift
        ways = self._set_of(line)
        if line not in ways:
            return False
        if ways[-1] != line:
            ways.remove(line)
            ways.append(line)
        if write:
            self.dirty.add(line)
        return True

    def fill(self, addr: int, dirty: bool = False) -> tuple[int | None, bool]:
        """Install the line holding ``addr`` as MRU.

        Returns ``(victim_line, victim_was_dirty)``; ``victim_line`` is None
        when no eviction happened.  Filling a resident line only promotes it.
        """
        line = addr >> self._shift
        ways = self._set_of(line)
        victim = None
        victim_dirty = False
        if line in ways:
            ways.remove(line)
        elif len(ways) >= self.assoc:
            victim = ways.pop(0)
            if victim in self.dirty:
                self.dirty.discard(victim)
                victim_dirty = True
        ways.append(line)
        if dirty:
            self.dirty.add(line)
        return victim, victim_dirty

    def resident_lines(self) -> set[int]:
        return {line for ways in self.sets for line in ways}
