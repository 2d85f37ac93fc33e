#!/usr/bin/env python3
"""
Tests for shared cells, programs, step accounting and the simulated scheduler
"""

import json

import pytest

from app.services.memcell import (
    NIL,
    ExecutionStatus,
    HardwareMemory,
    MemoryModelError,
    Note,
    Process,
    SchedulerError,
    Segment,
    SimulatedMemory,
    StepCounter,
    Strategy,
    cell_cas,
    cell_read,
    cell_write,
    default_exploration_budget,
    operation,
    replay,
    run_under_scheduler,
)


def writers(steps_each: int, processes: int = 2):
    """Each process writes its own tag ``steps_each`` times to one shared cell."""
    def build(memory):
        c = memory.alloc(1)

        def program(p):
            for i in range(steps_each):
                yield cell_write(c, 10 * p + i)

        return {p: program(p) for p in range(processes)}, c
    return build


def cas_racers(memory):
    c = memory.alloc(1, 0)

    def program(p):
        return (yield cell_cas(c, 0, p + 1))

    return {p: program(p) for p in range(2)}, c


def test_read_write_cas_on_hardware_memory():
    memory = HardwareMemory()
    c = memory.alloc(1, 5)

    def program():
        first = yield cell_cas(c, 5, 9)
        second = yield cell_cas(c, 5, 11)
        v = yield cell_read(c)
        yield cell_write(c, v + 1)
        return first, second, (yield cell_read(c))

    assert memory.run(0, program()) == (True, False, 10)
    assert memory.peek(c) == 10


def test_words_wrap_to_sixty_four_bits():
    memory = HardwareMemory()
    c = memory.alloc(1)

    def program():
        yield cell_write(c, -1)

    memory.run(0, program())
    assert memory.peek(c) == NIL


def test_allocation_after_freeze_is_rejected():
    memory = HardwareMemory()
    memory.alloc(4)
    memory.freeze()
    assert memory.frozen
    with pytest.raises(MemoryModelError):
        memory.alloc(1)
    with pytest.raises(MemoryModelError):
        memory.peek(4)


def test_yielding_anything_but_a_step_is_an_error():
    memory = HardwareMemory()

    def program():
        yield 42

    with pytest.raises(SchedulerError):
        memory.run(0, program())


def test_exhaustive_two_by_two_has_six_interleavings():
    result = run_under_scheduler(writers(2), Strategy.EXHAUSTIVE)
    assert result.interleavings == 6
    assert not result.truncated
    schedules = {tuple(e.schedule) for e in result.executions}
    assert len(schedules) == 6
    assert {e.final[0] for e in result.executions} == {1, 11}


def test_single_process_has_one_interleaving():
    result = run_under_scheduler(writers(3, processes=1), Strategy.EXHAUSTIVE)
    assert result.interleavings == 1
    assert result.executions[0].schedule == [0, 0, 0]


def test_preemption_bound_zero_only_runs_processes_to_completion():
    result = run_under_scheduler(writers(2), Strategy.EXHAUSTIVE, preemption_bound=0)
    assert sorted(tuple(e.schedule) for e in result.executions) == [(0, 0, 1, 1), (1, 1, 0, 0)]


def test_exhaustive_budget_truncates():
    result = run_under_scheduler(writers(2), Strategy.EXHAUSTIVE, budget=3)
    assert result.interleavings == 3
    assert result.truncated


def test_exactly_one_cas_wins_in_every_interleaving():
    result = run_under_scheduler(cas_racers, Strategy.EXHAUSTIVE)
    assert result.interleavings == 2
    for execution in result.executions:
        assert sorted(execution.results.values()) == [False, True]
        winner = next(p for p, won in execution.results.items() if won)
        assert execution.final[0] == winner + 1


@pytest.mark.parametrize("strategy", [Strategy.RANDOM, Strategy.PCT])
def test_sampled_strategies_are_deterministic_per_seed(strategy):
    first = run_under_scheduler(writers(4, processes=3), strategy, budget=8, seed=7)
    second = run_under_scheduler(writers(4, processes=3), strategy, budget=8, seed=7)
    assert first.interleavings == 8
    assert [e.schedule for e in first.executions] == [e.schedule for e in second.executions]


def test_replay_reproduces_every_final_memory():
    result = run_under_scheduler(cas_racers, Strategy.EXHAUSTIVE)
    result2 = run_under_scheduler(writers(2), Strategy.EXHAUSTIVE)
    for execution in result.executions + result2.executions:
        assert replay(execution.initial, execution.steps) == execution.final


def test_replay_rejects_a_tampered_log():
    execution = run_under_scheduler(cas_racers, Strategy.EXHAUSTIVE).executions[0]
    seq, proc, c, kind, args, result, copy = execution.steps[-1]
    tampered = execution.steps[:-1] + [(seq, proc, c, kind, args, not result, copy)]
    with pytest.raises(MemoryModelError):
        replay(execution.initial, tampered)


def test_directed_segments_by_steps():
    result = run_under_scheduler(writers(2), Strategy.DIRECTED, schedule=[Segment(1, steps=1)])
    assert result.executions[0].schedule == [1, 0, 0, 1]


def test_directed_segments_by_operations():
    def build(memory):
        c = memory.alloc(1)

        @operation("bump")
        def bump(p):
            v = yield cell_read(c)
            yield cell_write(c, v + 1)

        def program(p):
            yield from bump(p)
            yield from bump(p)

        return {p: program(p) for p in range(2)}, c

    result = run_under_scheduler(build, Strategy.DIRECTED, schedule=[Segment(0, ops=1), Segment(1, ops=2)])
    execution = result.executions[0]
    assert execution.schedule == [0, 0, 1, 1, 1, 1, 0, 0]
    assert execution.final[0] == 4


def test_directed_schedule_rejects_unknown_process():
    with pytest.raises(SchedulerError):
        run_under_scheduler(writers(1), Strategy.DIRECTED, schedule=[Segment(5, steps=1)])


def test_step_limit_stops_a_runaway_program():
    def build(memory):
        c = memory.alloc(1)

        def spin(p):
            while True:
                yield cell_read(c)

        return {0: spin(0)}, c

    result = run_under_scheduler(build, Strategy.EXHAUSTIVE, step_limit=50)
    assert result.step_limited == 1
    assert result.executions[0].status is ExecutionStatus.STEP_LIMIT
    assert len(result.executions[0].schedule) == 50


def faulty_writer(memory):
    """Process 0 writes once and then raises; process 1 writes twice."""
    c = memory.alloc(1)

    def faulty(p):
        yield cell_write(c, 1)
        raise RuntimeError("out of buffers")

    def writer(p):
        yield cell_write(c, 2)
        yield cell_write(c, 3)

    return {0: faulty(0), 1: writer(1)}, c


def test_program_exception_ends_the_interleaving():
    result = run_under_scheduler(faulty_writer, Strategy.EXHAUSTIVE, counter=StepCounter())
    assert result.interleavings == result.errored == 3
    assert sorted(e.schedule for e in result.executions) == [[0], [1, 0], [1, 1, 0]]
    for execution in result.executions:
        assert execution.status is ExecutionStatus.ERROR
        assert execution.error == "process 0 raised RuntimeError: out of buffers"


def test_program_exception_before_the_first_step():
    def build(memory):
        c = memory.alloc(1)

        def broken(p):
            raise KeyError(p)
            yield cell_read(c)

        def reader(p):
            return (yield cell_read(c))

        return {0: reader(0), 1: broken(1)}, c

    execution = run_under_scheduler(build, Strategy.DIRECTED, schedule=[]).executions[0]
    assert execution.status is ExecutionStatus.ERROR
    assert execution.schedule == []
    assert execution.error == "process 1 raised KeyError: 1"


def test_invocation_note_lands_just_before_the_next_step():
    def build(memory):
        c = memory.alloc(1)

        def announcer(p):
            yield Note("invoke", {"op": "write"})
            yield cell_write(c, 1)
            yield Note("respond", {"op": "write"})

        def other(p):
            yield cell_read(c)

        return {0: announcer(0), 1: other(1)}, c

    execution = run_under_scheduler(build, Strategy.DIRECTED, schedule=[Segment(1, steps=1)]).executions[0]
    other_step = execution.steps[0]
    invoke = next(n for n in execution.notes if n[2] == "invoke")
    write_step = next(s for s in execution.steps if s[1] == 0)
    assert other_step[1] == 1
    assert other_step[0] < invoke[0] < write_step[0]


def test_step_counter_counts_units_raw_and_copies():
    @operation("inner", unit=True)
    def inner(c):
        yield cell_read(c)
        yield cell_read(c)
        yield cell_read(c, copy=True)

    @operation("scan", detached=True)
    def scan(c):
        yield cell_read(c)
        yield cell_read(c)

    @operation("outer")
    def outer(c):
        yield from inner(c)
        yield from scan(c)
        yield cell_write(c, 1)

    counter = StepCounter()
    memory = HardwareMemory(counter)
    c = memory.alloc(1)
    memory.run(0, outer(c))
    stats = counter.merged()
    assert (stats["inner"].max_raw, stats["inner"].max_units, stats["inner"].max_copies) == (2, 2, 1)
    assert (stats["scan"].max_raw, stats["scan"].max_units) == (2, 2)
    assert (stats["outer"].max_raw, stats["outer"].max_units, stats["outer"].max_copies) == (5, 2, 1)
    assert counter.steps[0] == 6


def test_instrumentation_does_not_change_results():
    plain = run_under_scheduler(writers(2), Strategy.EXHAUSTIVE)
    counted = run_under_scheduler(writers(2), Strategy.EXHAUSTIVE, counter=StepCounter())
    assert [e.final for e in plain.executions] == [e.final for e in counted.executions]
    assert [e.schedule for e in plain.executions] == [e.schedule for e in counted.executions]


def test_failed_program_unwinds_its_frames():
    counter = StepCounter()
    memory = HardwareMemory(counter)
    c = memory.alloc(1)

    @operation("explode")
    def explode():
        yield cell_read(c)
        raise ValueError("boom")

    @operation("fine")
    def fine():
        return (yield cell_read(c))

    with pytest.raises(ValueError):
        memory.run(0, explode())
    assert memory.run(0, fine()) == 0
    assert counter.merged()["fine"].count == 1


def test_manual_process_stepping():
    memory = SimulatedMemory()
    c = memory.alloc(1)
    memory.freeze()
    proc = Process(memory, 0, iter_writes(c))
    assert proc.pending.cell == c
    proc.step()
    assert not proc.done
    proc.step()
    assert proc.done and proc.result == "done"
    with pytest.raises(SchedulerError):
        proc.step()


def iter_writes(c):
    yield cell_write(c, 1)
    yield cell_write(c, 2)
    return "done"


def test_execution_exports_step_records():
    execution = run_under_scheduler(cas_racers, Strategy.EXHAUSTIVE).executions[0]
    lines = execution.to_jsonl().splitlines()
    assert len(lines) == len(execution.steps) == 2
    first = json.loads(lines[0])
    assert set(first) == {"proc", "cell", "kind", "args", "result", "seq"}
    records = execution.step_records()
    assert records[0].kind == "cas" and records[0].result is True


def test_exploration_budget_from_environment(monkeypatch):
    monkeypatch.setenv("LLSC_EXPLORATION_BUDGET", "7")
    assert default_exploration_budget() == 7
    monkeypatch.setenv("LLSC_EXPLORATION_BUDGET", "lots")
    assert default_exploration_budget() == 1_000_000
