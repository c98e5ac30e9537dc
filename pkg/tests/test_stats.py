import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pargpu.stats import (
    COUNTER_NAMES,
    Counter,
    GpuStats,
    ReportFormatError,
    StatSheet,
    diff_reports,
    empty_memory_counters,
    parse_report,
    reduce,
    render_report,
)


def _sheet(l1_hits=0, lines=()):
    s = StatSheet()
    s.counters[Counter.L1_HITS] = l1_hits
    s.unique_lines = set(lines)
    return s


def test_counter_sum():
    gs = reduce([_sheet(5), _sheet(7), _sheet(0)], {}, 10)
    assert gs.totals["l1_hits"] == 12
    assert [row["l1_hits"] for row in gs.per_sm] == [5, 7, 0]


def test_set_union():
    gs = reduce([_sheet(lines=[0x100, 0x180]), _sheet(lines=[0x180, 0x200])], {}, 1)
    assert gs.unique_line_count == 3
    assert [row["unique_lines"] for row in gs.per_sm] == [2, 2]


def test_empty_sheets_are_zero():
    gs = reduce([StatSheet() for _ in range(80)], {}, 0)
    assert all(v == 0 for v in gs.totals.values())
    text = render_report(gs)
    assert parse_report(text)["ipc"] == "0.000000"
    assert diff_reports(text, text) is None


def test_report_is_sorted_and_stable():
    gs = reduce([_sheet(1, [0]), _sheet(2, [128])], {"l2_hits": 3}, 7)
    a, b = render_report(gs), render_report(gs)
    assert a == b
    keys = [line.split(" = ")[0] for line in a.splitlines()]
    assert keys == sorted(keys)
    assert "sm.1.l1_hits = 2" in a.splitlines()
    assert "l2_hits = 3" in a.splitlines()


def test_perturbed_counter_is_named():
    gs = reduce([_sheet(1), _sheet(2)], {}, 7)
    a = render_report(gs)
    b = a.replace("sm.1.l1_hits = 2", "sm.1.l1_hits = 3")
    assert diff_reports(a, b) == "sm.1.l1_hits"


def test_reordered_report_rejected():
    a = render_report(reduce([_sheet(1)], {}, 1))
    lines = a.splitlines()
    lines[0], lines[1] = lines[1], lines[0]
    with pytest.raises(ReportFormatError, match="canonical order"):
        diff_reports(a, "\n".join(lines))


def test_malformed_line_rejected():
    with pytest.raises(ReportFormatError):
        parse_report("cycles=1\n")


def test_ipc_and_instructions():
    s = StatSheet()
    s.counters[Counter.INSTRUCTIONS_ALU] = 30
    s.counters[Counter.INSTRUCTIONS_EXIT] = 10
    s.counters[Counter.L0I_ACCESSES] = 40  # not an instruction class
    gs = reduce([s], {}, 20)
    assert gs.instructions == 40
    assert gs.ipc == 2.0


def test_memory_side_defaults_filled():
    gs = reduce([StatSheet()], {"dram_accesses": 4}, 1)
    assert gs.memory == {**empty_memory_counters(), "dram_accesses": 4}


sheets = st.lists(
    st.builds(
        lambda cs, ls: StatSheet(cs, set(ls)),
        st.lists(st.integers(0, 1000), min_size=len(Counter), max_size=len(Counter)),
        st.sets(st.integers(0, 64).map(lambda x: x * 128), max_size=8),
    ),
    min_size=1,
    max_size=8,
)


@settings(max_examples=50, deadline=None)
@given(sheets, st.randoms())
def test_merge_order_does_not_matter(sheet_list, rnd):
    gs = reduce(sheet_list, {}, 5)
    acc = StatSheet()
    shuffled = list(sheet_list)
    rnd.shuffle(shuffled)
    for s in shuffled:
        acc.merge(s.copy())
    assert dict(zip(COUNTER_NAMES, acc.counters)) == gs.totals
    assert len(acc.unique_lines) == gs.unique_line_count


def test_string_lookup():
    s = _sheet(4)
    assert s["l1_hits"] == s[Counter.L1_HITS] == 4


def test_gpu_stats_zero_cycles():
    gs = GpuStats(0, dict.fromkeys(COUNTER_NAMES, 0), empty_memory_counters(), 0, ())
    assert gs.ipc == 0.0
