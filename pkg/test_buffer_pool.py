#!/usr/bin/env python3
"""
Tests for the buffer pool: sizing, free/retired lists, set difference and scans
"""

import random

import pytest

from app.services.buffer_pool import (
    BufferPool,
    EmptyFreeListError,
    PoolConfig,
    PoolConfigError,
    PoolMode,
    RetireError,
    ScanProgress,
    default_scan_budget,
    make_pool_config,
)
from app.services.memcell import NIL, HardwareMemory, StepCounter, cell_read


def make_pool(objects=1, processes=1, outstanding=1, mode=PoolMode.AMORTIZED, scan_budget=None, announced=None, counter=None):
    """Pool over a fresh memory; ``announced`` lists the initial words of one announcement cell per entry."""
    memory = HardwareMemory(counter)
    announced = list(announced or [])
    ann_base = memory.alloc(len(announced), NIL)
    for i, v in enumerate(announced):
        memory.poke(ann_base + i, v)

    def read_announcement(p, i):
        return (yield cell_read(ann_base + i))

    cfg = make_pool_config(objects, processes, outstanding, 1)
    pool = BufferPool(memory, cfg, len(announced), read_announcement, mode, scan_budget)
    memory.freeze()
    return memory, pool, ann_base


def replace(memory, pool, p, installed):
    """What a successful store does: take a fresh buffer, install it, retire the old one."""
    b = memory.run(p, pool.acquire(p))
    pool.mark_installed(p, b)
    memory.run(p, pool.retire(p, installed))
    return b


@pytest.mark.parametrize(
    "objects,processes,outstanding,deamortized,amortized",
    [(1, 1, 1, 5, 3), (4, 3, 2, 76, 40), (16, 2, 1, 32, 24)],
)
def test_pool_sizes(objects, processes, outstanding, deamortized, amortized):
    cfg = make_pool_config(objects, processes, outstanding)
    assert cfg.threshold == 2 * outstanding * processes
    assert cfg.pool_size(PoolMode.DEAMORTIZED) == deamortized
    assert cfg.pool_size(PoolMode.AMORTIZED) == amortized


@pytest.mark.parametrize("args", [(0, 1), (1, 0), (1, 1, 0), (1, 1, 1, 0)])
def test_invalid_configuration(args):
    with pytest.raises(PoolConfigError):
        make_pool_config(*args)


def test_config_is_immutable():
    cfg = PoolConfig(objects=1, processes=1)
    with pytest.raises(Exception):
        cfg.objects = 2


def test_initial_lists_hold_two_k_p_buffers_each():
    _memory, pool, _ = make_pool(objects=1, processes=2, mode=PoolMode.DEAMORTIZED)
    assert pool.list_sizes() == {0: ([4, 4], [0, 0]), 1: ([4, 4], [0, 0])}
    assert pool.check_single_state([0]) == []

    _memory, pool, _ = make_pool(objects=1, processes=2, mode=PoolMode.AMORTIZED)
    assert pool.list_sizes() == {0: ([4], [0]), 1: ([4], [0])}


def test_pid_cells_start_nil():
    memory, pool, _ = make_pool(objects=2, processes=2)
    assert all(memory.peek(pool.pid_cell(b)) == NIL for b in range(pool.size))


def test_acquire_and_retire_keep_every_buffer_in_one_place():
    memory, pool, _ = make_pool()
    b = replace(memory, pool, 0, 0)
    assert b != 0
    assert pool.free_count(0) == 1 and pool.retired_count(0) == 1
    assert pool.check_single_state([b]) == []


def test_amortized_scan_runs_at_threshold():
    memory, pool, _ = make_pool()
    installed = 0
    for _ in range(2):
        installed = replace(memory, pool, 0, installed)
    assert pool.audit.scans == 1
    assert pool.audit.min_transferred == 2
    assert pool.free_count(0) == 2 and pool.retired_count(0) == 0
    assert pool.check_single_state([installed]) == []


def test_announced_buffer_survives_a_scan():
    memory, pool, ann = make_pool(announced=[0])
    installed = replace(memory, pool, 0, 0)
    installed = replace(memory, pool, 0, installed)
    assert pool.audit.min_transferred == 1
    assert pool.audit.max_kept == 1
    assert pool.retired_count(0) == 1
    assert pool.check_single_state([installed]) == []


def test_deamortized_swap_scans_the_drained_pair():
    memory, pool, _ = make_pool(mode=PoolMode.DEAMORTIZED)
    installed = 0
    for _ in range(3):
        installed = replace(memory, pool, 0, installed)
    # Third acquire swapped pairs; the shadow scan fit in one budget.
    assert pool.audit.scans == 1
    assert pool.audit.overruns == 0
    assert pool.list_sizes()[0] == ([2, 1], [0, 1])
    assert pool.check_single_state([installed]) == []


def test_deamortized_overrun_finishes_the_scan_synchronously():
    memory, pool, _ = make_pool(mode=PoolMode.DEAMORTIZED, scan_budget=1)
    installed = 0
    for _ in range(5):
        installed = replace(memory, pool, 0, installed)
    assert pool.audit.overruns == 1
    assert pool.audit.scans >= 1
    assert pool.check_single_state([installed]) == []


def test_scan_step_bounds_its_work():
    memory, pool, _ = make_pool(processes=2, mode=PoolMode.DEAMORTIZED, scan_budget=3, announced=[NIL, NIL])
    installed = 0
    for _ in range(12):
        installed = replace(memory, pool, 0, installed)
    assert pool.audit.scans >= 1
    assert pool.audit.max_scan_units <= 3
    assert pool.audit.overruns == 0
    assert pool.check_single_state([installed]) == []


def test_scan_step_when_idle_and_bad_budget():
    memory, pool, _ = make_pool(mode=PoolMode.DEAMORTIZED)
    assert memory.run(0, pool.scan_step(0, 3)) is ScanProgress.IDLE
    with pytest.raises(PoolConfigError):
        memory.run(0, pool.scan_step(0, 0))
    with pytest.raises(PoolConfigError):
        make_pool(scan_budget=0)


def test_empty_free_list_is_reported():
    memory, pool, _ = make_pool()
    memory.run(0, pool.acquire(0))
    memory.run(0, pool.acquire(0))
    with pytest.raises(EmptyFreeListError):
        memory.run(0, pool.acquire(0))
    assert pool.audit.empty_events == 1


def test_restore_returns_an_unused_buffer():
    memory, pool, _ = make_pool()
    b = memory.run(0, pool.acquire(0))
    pool.restore(0, b)
    assert pool.free_count(0) == 2
    assert pool.check_single_state([0]) == []


@pytest.mark.parametrize("bad", [NIL, 99, -1])
def test_retire_rejects_invalid_indices(bad):
    memory, pool, _ = make_pool()
    with pytest.raises(RetireError):
        memory.run(0, pool.retire(0, bad))
    assert pool.audit.retire_errors == 1


def test_retire_rejects_double_retire_and_free_buffers():
    memory, pool, _ = make_pool(objects=2)
    memory.run(0, pool.retire(0, 0))
    with pytest.raises(RetireError):
        memory.run(0, pool.retire(0, 0))
    free = pool.size - 1
    with pytest.raises(RetireError):
        memory.run(0, pool.retire(0, free))
    assert pool.audit.retire_errors == 2


@pytest.mark.parametrize(
    "rlist,reserved,expected",
    [
        ([1, 3, 5, 7], [3, NIL, 99, 7], [1, 5]),
        ([1, 3, 5, 7], [], [1, 3, 5, 7]),
        ([], [1, 2, 3], []),
        ([2, 4], [4, 4, 2], []),
        ([6, 2, 9], [0, 1, 10], [6, 2, 9]),
    ],
)
def test_set_difference_examples(rlist, reserved, expected):
    memory, pool, _ = make_pool(objects=4, processes=2)
    assert memory.run(0, pool.set_difference(rlist, reserved, 0)) == expected
    assert all(memory.peek(pool.pid_cell(b)) == NIL for b in range(pool.size))


def test_set_difference_is_linear():
    counter = StepCounter()
    memory, pool, _ = make_pool(objects=4, processes=2, counter=counter)
    memory.run(0, pool.set_difference([1, 3, 5, 7], [3, NIL, 99, 7], 0))
    # two writes to prepare and two steps to sweep per rlist entry, read+write per in-range mark
    assert counter.merged()["set_difference"].max_raw == 4 * 4 + 2 * 2


def test_set_difference_matches_a_hash_set():
    memory, pool, _ = make_pool(objects=1, processes=8, outstanding=4)
    rng = random.Random(11)
    for _ in range(300):
        p = rng.randrange(8)
        rlist = rng.sample(range(pool.size), rng.randint(0, 64))
        reserved = [rng.randrange(pool.size) for _ in range(rng.randint(0, 32))] + [NIL]
        got = memory.run(p, pool.set_difference(rlist, reserved, p))
        assert got == [b for b in rlist if b not in set(reserved)]
    assert all(memory.peek(pool.pid_cell(b)) == NIL for b in range(pool.size))


def test_seed_value_checks_width():
    _memory, pool, _ = make_pool()
    with pytest.raises(PoolConfigError):
        pool.seed_value(0, (1, 2))


def test_scan_budget_from_environment(monkeypatch):
    monkeypatch.setenv("LLSC_SCAN_BUDGET", "9")
    assert default_scan_budget() == 9
    monkeypatch.delenv("LLSC_SCAN_BUDGET")
    assert default_scan_budget() == 6


def test_snapshot_audit_includes_list_sizes():
    memory, pool, _ = make_pool()
    replace(memory, pool, 0, 0)
    audit = pool.snapshot_audit()
    assert audit.free_sizes == {0: [1]}
    assert audit.retired_sizes == {0: [1]}
    assert pool.audit.free_sizes == {}
