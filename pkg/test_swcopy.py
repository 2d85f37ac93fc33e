#!/usr/bin/env python3
"""
Tests for single-writer Destinations: write, swcopy, helping readers and exploration
"""

import pytest

from app.services.bench import STEP_BOUNDS
from app.services.buffer_pool import PoolMode
from app.services.lin_harness import explore_and_check
from app.services.memcell import NIL, HardwareMemory, Process, StepCounter, Strategy
from app.services.scenarios import DestinationScenario
from app.services.swcopy import BOTTOM, DestinationFamily, OwnershipError
from app.services.weak_llsc import Mutation


@pytest.fixture
def destination():
    counter = StepCounter()
    memory = HardwareMemory(counter)
    family = DestinationFamily(memory, owners=[0, 1], num_processes=3)
    src = memory.alloc(1, 9)
    memory.freeze()
    return memory, family, src, counter


def test_fresh_destination_reads_bottom(destination):
    memory, family, _src, _ = destination
    assert memory.run(2, family.read(0, 2)) == BOTTOM
    assert BOTTOM != NIL


def test_write_then_read(destination):
    memory, family, _src, _ = destination
    memory.run(0, family.write(0, 0, 5))
    assert memory.run(2, family.read(0, 2)) == 5
    assert memory.run(1, family.read(0, 1)) == 5
    assert family.value_of(0) == 5
    assert family.value_of(1) == BOTTOM


def test_swcopy_copies_the_source_word(destination):
    memory, family, src, _ = destination
    memory.run(0, family.write(0, 0, 5))
    memory.run(0, family.swcopy(0, 0, src))
    assert memory.run(2, family.read(0, 2)) == 9
    assert family.src_of(0) == NIL
    assert family.audit.owner_failures == 0
    assert family.check_single_state() == []


def test_only_the_owner_may_write(destination):
    memory, family, src, _ = destination
    with pytest.raises(OwnershipError):
        memory.run(1, family.write(0, 1, 5))
    with pytest.raises(OwnershipError):
        memory.run(2, family.swcopy(1, 2, src))
    with pytest.raises(OwnershipError):
        DestinationFamily(HardwareMemory(), owners=[3], num_processes=2)


def test_reader_helps_an_unfinished_copy(destination):
    memory, family, src, _ = destination
    owner = Process(memory, 0, family.swcopy(0, 0, src))
    while family.src_of(0) == NIL:
        owner.step()
    assert family.value_of(0) == BOTTOM

    assert memory.run(2, family.read(0, 2)) == 9
    assert family.audit.helped_copies == 1
    assert family.src_of(0) == NIL
    assert family.value_of(0) == 9

    owner.run()
    assert family.value_of(0) == 9
    assert family.audit.owner_failures == 0
    assert family.check_single_state() == []


def test_step_counts_are_constant(destination):
    memory, family, src, counter = destination
    for i in range(30):
        memory.run(0, family.write(0, 0, i))
        memory.run(1, family.swcopy(1, 1, src))
        memory.run(2, family.read(i % 2, 2))
    stats = counter.merged()
    assert stats["dst_write"].max_units == 3
    assert stats["swcopy"].max_units == 6
    for label in ("dst_write", "swcopy", "dst_read"):
        assert stats[label].max_units <= STEP_BOUNDS[label]
    assert family.check_single_state() == []


def test_write_and_copy_are_linearizable():
    scenario = DestinationScenario(owner_ops=(("write", 5), ("swcopy",)), readers=1)
    report = explore_and_check(scenario, Strategy.EXHAUSTIVE, preemption_bound=2)
    assert report.violations_total == 0, report.violations[:1]
    assert report.op_stats["swcopy"].max_units <= STEP_BOUNDS["swcopy"]
    assert report.op_stats["dst_read"].max_units <= STEP_BOUNDS["dst_read"]


@pytest.mark.parametrize("mode", [PoolMode.DEAMORTIZED, PoolMode.AMORTIZED])
def test_copy_races_a_source_update(mode):
    scenario = DestinationScenario(owner_ops=(("swcopy",), ("read",)), readers=1, mutator=True, mode=mode)
    report = explore_and_check(scenario, Strategy.EXHAUSTIVE, preemption_bound=1)
    assert report.violations_total == 0, report.violations[:1]


def test_two_readers_exhaustive_within_two_preemptions():
    scenario = DestinationScenario(owner_ops=(("write", 5), ("swcopy",), ("read",)), readers=2, reads_per_reader=2)
    report = explore_and_check(scenario, Strategy.EXHAUSTIVE, preemption_bound=2)
    assert report.violations_total == 0, report.violations[:1]
    assert not report.truncated


def test_sampled_with_two_readers_and_a_mutator():
    scenario = DestinationScenario(readers=2, reads_per_reader=2, mutator=True)
    report = explore_and_check(scenario, Strategy.RANDOM, 300, seed=5)
    assert report.violations_total == 0, report.violations[:1]


def test_readers_that_do_not_help_are_caught():
    scenario = DestinationScenario(
        owner_ops=(("swcopy",), ("read",)), readers=1, mutator=True, mutations=[Mutation.SKIP_HELP]
    )
    report = explore_and_check(scenario, Strategy.EXHAUSTIVE, preemption_bound=1)
    assert report.violation_kinds.get("linearizability", 0) > 0
