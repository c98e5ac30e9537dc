import threading

import pytest

from pargpu.parallel import (
    WORKERS_ENV,
    ClaimCounter,
    SchedulePolicy,
    WorkerTeam,
    parallel_for_sms,
    static_assignment,
    workers_from_env,
)


def test_static_plan_worker_zero():
    plan = static_assignment(80, 16, 1)
    assert plan[0] == [0, 16, 32, 48, 64]
    assert sorted(i for share in plan for i in share) == list(range(80))


def test_static_plan_chunked():
    plan = static_assignment(10, 2, 3)
    assert plan == [[0, 1, 2, 6, 7, 8], [3, 4, 5, 9]]


def test_sequential_visits_ascending():
    seen = []
    parallel_for_sms(list(range(10)), SchedulePolicy(), seen.append)
    assert seen == list(range(10))


def _counts(policy, n=80, team=None):
    hits = [0] * n
    lock = threading.Lock()

    def body(i):
        with lock:
            hits[i] += 1

    parallel_for_sms(list(range(n)), policy, body, team=team)
    return hits


@pytest.mark.parametrize("kind", ["static", "dynamic"])
@pytest.mark.parametrize("workers", [1, 2, 4, 8, 16, 32])
@pytest.mark.parametrize("chunk", [1, 3])
def test_exactly_once(kind, workers, chunk):
    assert _counts(SchedulePolicy(kind, workers, chunk)) == [1] * 80


def test_static_worker_ownership():
    owner = {}
    lock = threading.Lock()

    def body(i):
        with lock:
            owner[i] = threading.current_thread().name

    with WorkerTeam(4) as team:
        for _ in range(3):
            parallel_for_sms(list(range(16)), SchedulePolicy("static", 4), body, team=team)
    main = threading.current_thread().name
    assert {owner[i] for i in (0, 4, 8, 12)} == {main}
    assert len({owner[i] for i in (1, 5, 9, 13)}) == 1


def test_team_reused_across_calls():
    with WorkerTeam(3) as team:
        for _ in range(50):
            assert _counts(SchedulePolicy("dynamic", 3), n=7, team=team) == [1] * 7


def test_team_propagates_errors():
    def boom(wid):
        if wid == 1:
            raise RuntimeError("worker failed")

    with WorkerTeam(2) as team:
        with pytest.raises(RuntimeError, match="worker failed"):
            team.run(boom)
        team.run(lambda wid: None)  # still usable


def test_closed_team_refuses_work():
    team = WorkerTeam(2)
    team.close()
    with pytest.raises(RuntimeError):
        team.run(lambda wid: None)


def test_claim_counter_exhausts():
    c = ClaimCounter(5, 2)
    assert [c.claim() for _ in range(4)] == [0, 2, 4, None]


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        ({"kind": "guided"}, "unknown schedule"),
        ({"workers": 0}, "workers"),
        ({"chunk": 0}, "chunk"),
        ({"kind": "dynamic", "workers": 2, "backend": "process"}, "static scheduling only"),
        ({"backend": "mpi"}, "unknown backend"),
    ],
)
def test_policy_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        SchedulePolicy(**kwargs)


def test_policy_labels():
    assert SchedulePolicy().label() == "seq"
    assert SchedulePolicy("dynamic", 16).label() == "dynamic-16"
    assert SchedulePolicy("static", 4, backend="process").label() == "static-4/process"
    assert SchedulePolicy("seq", 8).team_size == 1


def test_workers_from_env(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert workers_from_env() == 1
    monkeypatch.setenv(WORKERS_ENV, "6")
    assert workers_from_env() == 6
    monkeypatch.setenv(WORKERS_ENV, "0")
    with pytest.raises(ValueError):
        workers_from_env()
    monkeypatch.setenv(WORKERS_ENV, "many")
    with pytest.raises(ValueError):
        workers_from_env()
