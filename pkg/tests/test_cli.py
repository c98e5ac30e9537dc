import pytest

from pargpu import smcore
from pargpu.cli import main, resolve_workers
from pargpu.parallel import WORKERS_ENV
from pargpu.stats import Counter

from conftest import MINIMAL


@pytest.fixture
def trace_file(tmp_path):
    p = tmp_path / "min.trace"
    p.write_text(MINIMAL, encoding="utf-8")
    return str(p)


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text("num_sms = 4\nnum_mem_partitions = 2\nl2_total_size_bytes = 256 KiB\n", encoding="utf-8")
    return str(p)


def test_run_writes_report(trace_file, tmp_path, capsys):
    out = tmp_path / "r.txt"
    assert main(["run", "--trace", trace_file, "--stats-out", str(out)]) == 0
    text = out.read_text()
    assert "instructions_alu = 1\n" in text
    assert "cycles=6" in capsys.readouterr().out


def test_run_rejects_zero_workers(trace_file):
    assert main(["run", "--trace", trace_file, "--workers", "0"]) == 2


def test_run_missing_trace(tmp_path):
    assert main(["run", "--trace", str(tmp_path / "nope.trace")]) == 2


def test_run_bad_config(trace_file, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("num_sms = 0\n")
    assert main(["run", "--trace", trace_file, "--config", str(bad)]) == 2


def test_trace_and_preset_conflict(trace_file):
    assert main(["run", "--trace", trace_file, "--preset", "two_cta"]) == 2


def test_dynamic_matches_sequential_bytes(tmp_path, cfg_file):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    common = ["run", "--preset", "imbalanced", "--config", cfg_file]
    assert main(common + ["--schedule", "seq", "--stats-out", str(a)]) == 0
    assert main(common + ["--schedule", "dynamic", "--workers", "16", "--stats-out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_passes(cfg_file, capsys):
    assert main(["verify", "--preset", "memory_heavy", "--config", cfg_file, "--workers-list", "2,4,8,16"]) == 0
    out = capsys.readouterr().out
    assert out.count("identical") == 8


def test_verify_empty_list_is_usage_error(trace_file):
    assert main(["verify", "--trace", trace_file, "--workers-list", ""]) == 2
    assert main(["verify", "--trace", trace_file, "--workers-list", ","]) == 2


def test_verify_catches_global_counter(monkeypatch, cfg_file, capsys):
    # a shared counter every SM bumps: the classic race the per-SM sheets avoid
    shared = [0]
    real = smcore.sm_cycle

    def racy(sm, program, cfg):
        real(sm, program, cfg)
        shared[0] += 1
        sm.stat_sheet.counters[Counter.L0I_ACCESSES] = shared[0]

    monkeypatch.setattr(smcore, "sm_cycle", racy)
    status = main(["verify", "--preset", "two_cta", "--config", cfg_file, "--workers-list", "2", "--schedules", "static"])
    assert status == 1
    assert "l0i_accesses" in capsys.readouterr().out


def test_invariant_breach_exits_1(monkeypatch, trace_file):
    real = smcore.sm_cycle

    def lossy(sm, program, cfg):
        real(sm, program, cfg)
        sm.stat_sheet.counters[Counter.INSTRUCTIONS_ALU] = 0

    monkeypatch.setattr(smcore, "sm_cycle", lossy)
    assert main(["run", "--trace", trace_file]) == 1


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.trace", tmp_path / "b.trace"
    assert main(["gen", "--preset", "two_cta", "--seed", "1", "--out", str(a)]) == 0
    assert main(["gen", "--preset", "two_cta", "--seed", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["run", "--trace", str(a), "--stats-out", str(tmp_path / "r.txt")]) == 0


def test_profile_prints_sm_share(capsys):
    assert main(["profile", "--preset", "balanced"]) == 0
    out = capsys.readouterr().out
    assert "sm_share = " in out and "phase.sm.share" in out


def test_bench_csv_rows(tmp_path, cfg_file):
    out = tmp_path / "b.csv"
    summary = tmp_path / "s.csv"
    args = ["bench", "--preset", "two_cta", "--config", cfg_file, "--workers", "1,2,4", "--out", str(out)]
    assert main(args + ["--summary-out", str(summary)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 3 * 3
    assert len(summary.read_text().splitlines()) == 1 + 3


def test_bench_needs_input():
    assert main(["bench"]) == 2


def test_bench_repeats_floor(cfg_file):
    assert main(["bench", "--preset", "two_cta", "--config", cfg_file, "--repeats", "2"]) == 2


def test_worker_precedence(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert resolve_workers(None) == 1
    monkeypatch.setenv(WORKERS_ENV, "4")
    assert resolve_workers(None) == 4
    assert resolve_workers(2) == 2


def test_env_workers_used_by_run(monkeypatch, trace_file, capsys):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert main(["run", "--trace", trace_file, "--stats-out", "/dev/null"]) == 0
    assert "static-3" in capsys.readouterr().out


def test_no_subcommand():
    assert main([]) == 2
