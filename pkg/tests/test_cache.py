import random

from hypothesis import given, settings
from hypothesis import strategies as st

from pargpu.cache import LruCache
from pargpu.memsys import l2_oracle_check


def test_repeated_address_misses_once():
    assert l2_oracle_check([(0x40, False)] * 4, 4, 2, 128) == [False, True, True, True]


def test_lru_thrash_all_misses():
    # assoc + 1 lines in one set, visited round-robin
    reqs = [(line * 4 * 128, False) for line in range(3)] * 5
    assert l2_oracle_check(reqs, 4, 2, 128) == [False] * 15


def _replay(cache: LruCache, reqs, write_allocate: bool) -> list[bool]:
    out = []
    for addr, is_write in reqs:
        hit = cache.lookup(addr, write=is_write)
        out.append(hit)
        if not hit and (write_allocate or not is_write):
            cache.fill(addr, dirty=is_write)
    return out


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 40 * 128), st.booleans()), max_size=200),
    st.sampled_from([1, 2, 4]),
    st.sampled_from([1, 2, 4]),
    st.sampled_from([1, 3]),
    st.booleans(),
)
def test_lru_cache_matches_oracle(reqs, sets, ways, stride, write_allocate):
    cache = LruCache(sets, ways, 128, index_stride=stride)
    expected = l2_oracle_check(reqs, sets, ways, 128, index_stride=stride, write_allocate=write_allocate)
    assert _replay(cache, reqs, write_allocate) == expected


def test_fill_reports_dirty_victim():
    c = LruCache(1, 2, 128)
    c.fill(0, dirty=True)
    c.fill(128)
    victim, dirty = c.fill(256)
    assert (victim, dirty) == (0, True)
    victim, dirty = c.fill(384)
    assert (victim, dirty) == (1, False)


def test_hit_promotes_to_mru():
    c = LruCache(1, 2, 128)
    c.fill(0)
    c.fill(128)
    assert c.lookup(0)
    victim, _ = c.fill(256)
    assert victim == 1  # line 1 was LRU after touching line 0


def test_stride_spreads_interleaved_lines():
    # lines 0, 48, 96, ... all belong to one slice; stride 48 spreads them
    c = LruCache(4, 1, 128, index_stride=48)
    for k in range(4):
        c.fill(k * 48 * 128)
    assert len(c.resident_lines()) == 4


def test_thousand_random_requests():
    rng = random.Random(7)
    reqs = [(rng.randrange(64) * 128, rng.random() < 0.3) for _ in range(1000)]
    cache = LruCache(8, 4, 128)
    assert _replay(cache, reqs, True) == l2_oracle_check(reqs, 8, 4, 128)
