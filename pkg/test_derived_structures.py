#!/usr/bin/env python3
"""
Tests for the counter and stack built on LL/SC, including the ABA case raw CAS gets wrong
"""

import threading

import pytest

from app.services.derived_structures import LLSCCounter, LLSCStack, StackCapacityError, TreiberStack
from app.services.lin_harness import explore_and_check
from app.services.memcell import HardwareMemory, Process, StepKind, Strategy
from app.services.scenarios import CounterScenario, StackScenario


def test_counter_counts():
    memory = HardwareMemory()
    counter = LLSCCounter(memory, 2, initial=5)
    memory.freeze()
    assert memory.run(0, counter.increment(0)) == 6
    assert memory.run(1, counter.increment(1)) == 7
    assert memory.run(0, counter.read(0)) == 7
    assert counter.value() == 7
    assert counter.llsc.check_single_state() == []


def test_counter_under_threads():
    memory = HardwareMemory()
    counter = LLSCCounter(memory, 4)
    memory.freeze()
    seen = [[] for _ in range(4)]

    def worker(p):
        for _ in range(200):
            seen[p].append(memory.run(p, counter.increment(p)))

    threads = [threading.Thread(target=worker, args=(p,)) for p in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert counter.value() == 800
    returned = sorted(v for values in seen for v in values)
    assert returned == list(range(1, 801))
    assert counter.llsc.check_single_state() == []


def test_counter_scenario_is_linearizable():
    report = explore_and_check(CounterScenario(processes=2), Strategy.EXHAUSTIVE, preemption_bound=2)
    assert report.ok, report.violations[:1]


def test_stack_is_last_in_first_out():
    memory = HardwareMemory()
    stack = LLSCStack(memory, 2, nodes_per_process=4)
    memory.freeze()
    for v in (1, 2, 3):
        memory.run(0, stack.push(0, v))
    assert stack.contents() == [3, 2, 1]
    assert memory.run(1, stack.pop(1)) == 3
    assert memory.run(1, stack.pop(1)) == 2
    assert memory.run(0, stack.pop(0)) == 1
    assert memory.run(0, stack.pop(0)) is None
    assert stack.contents() == []
    assert stack.head.check_single_state() == []


def test_stack_runs_out_of_nodes():
    memory = HardwareMemory()
    stack = LLSCStack(memory, 1, nodes_per_process=2)
    memory.freeze()
    memory.run(0, stack.push(0, 1))
    memory.run(0, stack.push(0, 2))
    with pytest.raises(StackCapacityError):
        memory.run(0, stack.push(0, 3))
    assert memory.run(0, stack.pop(0)) == 2
    memory.run(0, stack.push(0, 3))
    assert stack.contents() == [3, 1]


def test_popped_nodes_move_to_the_popper():
    memory = HardwareMemory()
    stack = LLSCStack(memory, 2, nodes_per_process=2)
    memory.freeze()
    memory.run(0, stack.push(0, 1))
    memory.run(0, stack.push(0, 2))
    assert memory.run(1, stack.pop(1)) == 2
    assert memory.run(1, stack.pop(1)) == 1
    with pytest.raises(StackCapacityError):
        memory.run(0, stack.push(0, 3))
    for v in range(10, 14):
        memory.run(1, stack.push(1, v))
    with pytest.raises(StackCapacityError):
        memory.run(1, stack.push(1, 14))
    assert stack.contents() == [13, 12, 11, 10]
    assert stack.head.check_single_state() == []


def test_stack_node_count_is_required():
    with pytest.raises(TypeError):
        LLSCStack(HardwareMemory(), 2)
    with pytest.raises(TypeError):
        TreiberStack(HardwareMemory(), 2)


def _recycle_the_top(memory, stack):
    """Process 1 pops both nodes and pushes them back with new values, so the top node index repeats."""
    assert memory.run(1, stack.pop(1)) == 2
    assert memory.run(1, stack.pop(1)) == 1
    memory.run(1, stack.push(1, 3))
    memory.run(1, stack.push(1, 4))


def test_raw_cas_stack_suffers_aba():
    memory = HardwareMemory()
    stack = TreiberStack(memory, 2, 4)
    memory.freeze()
    memory.run(1, stack.push(1, 1))
    memory.run(1, stack.push(1, 2))

    popper = Process(memory, 0, stack.pop(0))
    for _ in range(3):
        popper.step()
    assert popper.pending.kind is StepKind.CAS

    _recycle_the_top(memory, stack)
    # The CAS sees the same node index and succeeds on a stale next pointer.
    assert popper.run() == 2
    assert stack.contents() == [3]


def test_llsc_stack_is_immune_to_aba():
    memory = HardwareMemory()
    stack = LLSCStack(memory, 2, nodes_per_process=4)
    memory.freeze()
    memory.run(1, stack.push(1, 1))
    memory.run(1, stack.push(1, 2))

    popper = Process(memory, 0, stack.pop(0))
    head = stack.head.buf_base
    while not (popper.pending.kind is StepKind.CAS and popper.pending.cell == head):
        popper.step()

    _recycle_the_top(memory, stack)
    assert popper.run() == 4
    assert stack.contents() == [3]
    assert stack.head.check_single_state() == []


def test_stack_scenario_is_linearizable():
    report = explore_and_check(StackScenario(pushes=[(1,), (2,)], poppers=1), Strategy.EXHAUSTIVE, preemption_bound=1)
    assert report.ok, report.violations[:1]
    assert report.interleavings > 1


def test_stack_scenario_sampled():
    report = explore_and_check(StackScenario(pushes=[(1, 2), (3,)], poppers=1, pops=2), Strategy.PCT, 100, seed=4)
    assert report.ok, report.violations[:1]
