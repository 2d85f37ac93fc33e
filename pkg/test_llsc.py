#!/usr/bin/env python3
"""
Tests for LL/SC with handles: links, slots, failures, step and space bounds, exploration
"""

import pytest

from app.services.bench import STEP_BOUNDS
from app.services.buffer_pool import PoolMode
from app.services.lin_harness import explore_and_check
from app.services.llsc import (
    HandleError,
    LLSCFamily,
    OutstandingLimitError,
    SingleLLSC,
    SlotHandle,
)
from app.services.memcell import HardwareMemory, StepCounter, Strategy
from app.services.scenarios import LLSCScenario


@pytest.fixture
def llsc():
    counter = StepCounter()
    memory = HardwareMemory(counter)
    family = LLSCFamily(memory, 2, 2, outstanding=2, initial_values=[10, 20])
    memory.freeze()
    return memory, family, counter


def test_ll_then_sc(llsc):
    memory, family, _ = llsc
    value, handle = memory.run(0, family.ll(0, 0))
    assert value == (10,)
    assert handle == SlotHandle(0)
    assert memory.run(0, family.vl(0, 0, handle))
    assert memory.run(0, family.sc(0, 0, 11, handle))
    assert family.value_of(0) == (11,)
    assert family.outstanding(0) == 0
    assert family.check_single_state() == []
    assert family.check_slots() == []


def test_k_links_per_process(llsc):
    memory, family, _ = llsc
    _, h0 = memory.run(0, family.ll(0, 0))
    _, h1 = memory.run(0, family.ll(1, 0))
    assert (h0.slot, h1.slot) == (0, 1)
    assert family.outstanding(0) == 2
    with pytest.raises(OutstandingLimitError):
        memory.run(0, family.ll(0, 0))
    assert memory.run(0, family.sc(1, 0, 21, h1))
    memory.run(0, family.cl(0, 0, h0))
    assert family.outstanding(0) == 0
    assert sorted(family.free_slots(0)) == [0, 1]
    assert family.value_of(1) == (21,)
    assert family.check_slots() == []


def test_two_links_on_one_object(llsc):
    memory, family, _ = llsc
    _, first = memory.run(0, family.ll(0, 0))
    _, second = memory.run(0, family.ll(0, 0))
    assert memory.run(0, family.sc(0, 0, 12, second))
    assert not memory.run(0, family.vl(0, 0, first))
    assert not memory.run(0, family.sc(0, 0, 13, first))
    assert family.value_of(0) == (12,)


def test_interfering_sc_fails_the_older_link(llsc):
    memory, family, _ = llsc
    _, h0 = memory.run(0, family.ll(0, 0))
    _, h1 = memory.run(1, family.ll(0, 1))
    assert memory.run(1, family.sc(0, 1, 30, h1))
    assert not memory.run(0, family.vl(0, 0, h0))
    assert not memory.run(0, family.sc(0, 0, 31, h0))
    assert family.value_of(0) == (30,)
    assert family.check_single_state() == []


def test_stale_and_foreign_handles_are_rejected(llsc):
    memory, family, _ = llsc
    _, h = memory.run(0, family.ll(0, 0))
    with pytest.raises(HandleError):
        memory.run(0, family.sc(1, 0, 5, h))
    with pytest.raises(HandleError):
        memory.run(1, family.vl(0, 1, h))
    memory.run(0, family.cl(0, 0, h))
    with pytest.raises(HandleError):
        memory.run(0, family.sc(0, 0, 5, h))
    with pytest.raises(HandleError):
        memory.run(0, family.cl(0, 0, "slot-0"))
    assert family.check_slots() == []


def test_step_counts_stay_within_bounds(llsc):
    memory, family, counter = llsc
    for i in range(40):
        p, x = i % 2, (i // 2) % 2
        value, h = memory.run(p, family.ll(x, p))
        memory.run(p, family.vl(x, p, h))
        if i % 5 == 4:
            memory.run(p, family.cl(x, p, h))
        else:
            memory.run(p, family.sc(x, p, value[0] + 1, h))
    stats = counter.merged()
    assert stats["ll"].max_units == 7
    assert stats["cl"].max_units == 3
    for label in ("ll", "llsc_vl", "sc", "cl"):
        assert stats[label].max_units <= STEP_BOUNDS[label], label
    assert family.pool.audit.scans > 0
    assert family.pool.audit.min_transferred >= 2 * 2
    assert family.check_single_state() == []


@pytest.mark.parametrize("objects,processes,outstanding,width", [(1, 1, 1, 1), (16, 4, 2, 1), (4, 8, 1, 4), (256, 2, 3, 2)])
def test_space_stays_within_the_limit(objects, processes, outstanding, width):
    family = LLSCFamily(HardwareMemory(), objects, processes, outstanding=outstanding, width=width)
    assert family.allocated_words <= family.space_limit()


def test_amortized_mode_recycles_buffers():
    memory = HardwareMemory()
    family = LLSCFamily(memory, 1, 2, mode=PoolMode.AMORTIZED)
    memory.freeze()
    for i in range(50):
        p = i % 2
        value, h = memory.run(p, family.ll(0, p))
        assert memory.run(p, family.sc(0, p, value[0] + 1, h))
    assert family.value_of(0) == (50,)
    assert family.pool.audit.scans > 0
    assert family.check_single_state() == []


def test_single_llsc_hides_handles():
    memory = HardwareMemory()
    single = SingleLLSC(memory, 1, 2, initial_values=[3])
    memory.freeze()
    assert memory.run(0, single.ll(0, 0)) == (3,)
    assert memory.run(0, single.vl(0, 0))
    assert memory.run(0, single.sc(0, 0, 4))
    with pytest.raises(HandleError):
        memory.run(0, single.sc(0, 0, 5))
    assert memory.run(1, single.ll(0, 1)) == (4,)
    memory.run(1, single.cl(0, 1))


@pytest.mark.parametrize("mode", [PoolMode.DEAMORTIZED, PoolMode.AMORTIZED])
def test_two_processes_are_linearizable(mode):
    report = explore_and_check(LLSCScenario(processes=2, script=("ll", "vl", "sc"), mode=mode), Strategy.EXHAUSTIVE, preemption_bound=2)
    assert report.violations_total == 0, report.violations[:1]
    assert report.op_stats["ll"].max_units <= STEP_BOUNDS["ll"]
    assert report.op_stats["sc"].max_units <= STEP_BOUNDS["sc"]


def test_two_outstanding_links_are_linearizable():
    scenario = LLSCScenario(processes=2, outstanding=2, script=("ll", "ll", "vl", "sc", "cl"))
    report = explore_and_check(scenario, Strategy.EXHAUSTIVE, preemption_bound=1)
    assert report.violations_total == 0, report.violations[:1]


@pytest.mark.parametrize("strategy", [Strategy.RANDOM, Strategy.PCT])
def test_three_processes_sampled(strategy):
    scenario = LLSCScenario(processes=3, script=("ll", "sc", "ll", "cl"))
    report = explore_and_check(scenario, strategy, 150, seed=2)
    assert report.violations_total == 0, report.violations[:1]


def test_three_processes_exhaustive_within_two_preemptions():
    report = explore_and_check(LLSCScenario(processes=3), Strategy.EXHAUSTIVE, preemption_bound=2)
    assert report.violations_total == 0, report.violations[:1]
    assert not report.truncated
