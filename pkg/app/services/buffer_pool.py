import logging
import os
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError

from .memcell import NIL, Memory, Program, cell_read, cell_write, operation

logger = logging.getLogger("BufferPool")

DEFAULT_SCAN_BUDGET = 6


class PoolConfigError(ValueError):
    pass


class EmptyFreeListError(RuntimeError):
    pass


class RetireError(RuntimeError):
    pass


class PoolMode(str, Enum):
    DEAMORTIZED = "deamortized"
    AMORTIZED = "amortized"


class ScanProgress(str, Enum):
    IDLE = "idle"
    ADVANCED = "advanced"
    DONE = "done"


class PoolConfig(BaseModel):
    """Sizing of a buffer pool: M objects, P processes, k outstanding links, L words per value."""

    objects: int = Field(ge=1)
    processes: int = Field(ge=1)
    outstanding: int = Field(default=1, ge=1)
    width: int = Field(default=1, ge=1)

    model_config = {"frozen": True}

    @property
    def threshold(self) -> int:
        return 2 * self.outstanding * self.processes

    def pool_size(self, mode: PoolMode = PoolMode.DEAMORTIZED) -> int:
        pairs = 2 if PoolMode(mode) is PoolMode.DEAMORTIZED else 1
        return self.objects + pairs * self.threshold * self.processes


def make_pool_config(objects: int, processes: int, outstanding: int = 1, width: int = 1) -> PoolConfig:
    try:
        return PoolConfig(objects=objects, processes=processes, outstanding=outstanding, width=width)
    except ValidationError as e:
        raise PoolConfigError(
            f"Invalid pool configuration M={objects} P={processes} k={outstanding} L={width}: {e.errors()[0]['msg']}"
        ) from e


def default_scan_budget() -> int:
    raw = os.getenv("LLSC_SCAN_BUDGET")
    if not raw:
        return DEFAULT_SCAN_BUDGET
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring invalid LLSC_SCAN_BUDGET={raw!r}")
        return DEFAULT_SCAN_BUDGET


class PoolAudit(BaseModel):
    pool_size: int
    mode: PoolMode
    scans: int = 0
    transferred_total: int = 0
    min_transferred: Optional[int] = None
    max_kept: int = 0
    overruns: int = 0
    empty_events: int = 0
    retire_errors: int = 0
    max_scan_units: int = 0
    min_active_free: Dict[int, int] = {}
    free_sizes: Dict[int, List[int]] = {}
    retired_sizes: Dict[int, List[int]] = {}


class _Phase(Enum):
    PREPARE = 1
    MARK = 2
    SWEEP = 3


@dataclass
class _ListPair:
    flist: List[int] = field(default_factory=list)
    rlist: List[int] = field(default_factory=list)


@dataclass
class _Scan:
    items: List[int]
    phase: _Phase = _Phase.PREPARE
    cursor: int = 0
    freed: List[int] = field(default_factory=list)


@dataclass
class _ProcessLists:
    pairs: List[_ListPair]
    active: int = 0
    scan: Optional[_Scan] = None

    @property
    def current(self) -> _ListPair:
        return self.pairs[self.active]

    @property
    def shadow(self) -> _ListPair:
        return self.pairs[1 - self.active]


AnnouncementReader = Callable[[int, int], Program]


class BufferPool:
    """
    Preallocated arena of L-word buffers with per-process free and retired lists.

    Buffers ``0..M-1`` start installed in the M objects; every process then
    owns ``2kP`` free buffers per list pair (one pair in amortized mode, an
    active and a shadow pair otherwise). Buffer metadata (pid, seen) lives in
    shared cells so the set difference can run in linear time.

    All methods that touch shared cells are programs (see ``memcell``).
    The free/retired lists are process-local Python state.
    """

    def __init__(
        self,
        memory: Memory,
        cfg: PoolConfig,
        announcement_count: int,
        read_announcement: AnnouncementReader,
        mode: PoolMode = PoolMode.DEAMORTIZED,
        scan_budget: Optional[int] = None,
    ):
        self.memory = memory
        self.cfg = cfg
        self.mode = PoolMode(mode)
        self.scan_budget = scan_budget if scan_budget is not None else default_scan_budget()
        if self.scan_budget < 1:
            raise PoolConfigError(f"Scan budget must be at least 1, got {self.scan_budget}")
        self.announcement_count = announcement_count
        self._read_announcement = read_announcement
        self.size = cfg.pool_size(self.mode)
        self.width = cfg.width

        self.val_base = memory.alloc(self.size * self.width, 0)
        self.pid_base = memory.alloc(self.size, NIL)
        self.seen_base = memory.alloc(self.size, 0)

        pairs = 2 if self.mode is PoolMode.DEAMORTIZED else 1
        threshold = cfg.threshold
        self._lists: List[_ProcessLists] = []
        self._where: List[Tuple] = [("installed",)] * cfg.objects
        nxt = cfg.objects
        for p in range(cfg.processes):
            lists = _ProcessLists(pairs=[])
            for _ in range(pairs):
                lists.pairs.append(_ListPair(flist=list(range(nxt, nxt + threshold))))
                self._where.extend([("free", p)] * threshold)
                nxt += threshold
            self._lists.append(lists)

        self._lock = threading.Lock()
        self.audit = PoolAudit(
            pool_size=self.size,
            mode=self.mode,
            min_active_free={p: threshold for p in range(cfg.processes)},
        )

    # -- layout --------------------------------------------------------------

    def payload_cell(self, b: int, j: int = 0) -> int:
        return self.val_base + b * self.width + j

    def pid_cell(self, b: int) -> int:
        return self.pid_base + b

    def seen_cell(self, b: int) -> int:
        return self.seen_base + b

    def seed_value(self, b: int, values: Sequence[int]) -> None:
        """Set a buffer's payload before the memory is frozen (not a shared step)."""
        self._check_width(values)
        for j, v in enumerate(values):
            self.memory.poke(self.payload_cell(b, j), v)

    def _check_width(self, values: Sequence[int]) -> None:
        if len(values) != self.width:
            raise PoolConfigError(f"Value has {len(values)} words, family width is {self.width}")

    # -- payload -------------------------------------------------------------

    def read_value(self, b: int) -> Program:
        out = []
        for j in range(self.width):
            out.append((yield cell_read(self.payload_cell(b, j), copy=True)))
        return tuple(out)

    def write_value(self, b: int, values: Sequence[int]) -> Program:
        self._check_width(values)
        for j, v in enumerate(values):
            yield cell_write(self.payload_cell(b, j), v, copy=True)

    # -- free list -----------------------------------------------------------

    @operation("acquire")
    def acquire(self, p: int) -> Program:
        lists = self._lists[p]
        if self.mode is PoolMode.AMORTIZED:
            if not lists.current.flist:
                self._empty(p)
            b = lists.current.flist.pop()
        else:
            if not lists.current.flist:
                if lists.scan is not None:
                    with self._lock:
                        self.audit.overruns += 1
                    logger.warning(f"Process {p} drained its free list before the shadow scan finished")
                    yield from self._run_scan(p, None)
                lists.active = 1 - lists.active
                shadow = lists.shadow
                if shadow.rlist:
                    lists.scan = _Scan(items=list(shadow.rlist))
                if not lists.current.flist:
                    self._empty(p)
            b = lists.current.flist.pop()
            yield from self.scan_step(p, self.scan_budget)
        remaining = len(lists.current.flist)
        if remaining < self.audit.min_active_free[p]:
            self.audit.min_active_free[p] = remaining
        self._where[b] = ("inflight", p)
        return b

    def _empty(self, p: int) -> None:
        with self._lock:
            self.audit.empty_events += 1
        logger.error(f"Process {p} found its active free list empty")
        raise EmptyFreeListError(f"Free list of process {p} is empty")

    def restore(self, p: int, b: int) -> None:
        """Return a buffer whose install failed; process-local, no shared steps."""
        self._lists[p].current.flist.append(b)
        self._where[b] = ("free", p)

    def mark_installed(self, p: int, b: int) -> None:
        with self._lock:
            if self._where[b] == ("inflight", p):
                self._where[b] = ("installed",)

    @operation("retire")
    def retire(self, p: int, b: int) -> Program:
        self._validate_retire(p, b)
        pair = self._lists[p].current
        pair.rlist.append(b)
        if self.mode is PoolMode.AMORTIZED and len(pair.rlist) >= self.cfg.threshold:
            self._lists[p].scan = _Scan(items=list(pair.rlist))
            yield from self._run_scan(p, None)

    def _validate_retire(self, p: int, b: int) -> None:
        if b == NIL or not 0 <= b < self.size:
            self._retire_error(p, f"Process {p} retired invalid buffer index {b}")
        with self._lock:
            where = self._where[b]
            if where[0] not in ("free", "retired"):
                self._where[b] = ("retired", p)
                return
        self._retire_error(p, f"Process {p} retired buffer {b} which is already {where[0]} at process {where[1]}")

    def _retire_error(self, p: int, message: str) -> None:
        with self._lock:
            self.audit.retire_errors += 1
        logger.error(message)
        raise RetireError(message)

    # -- set difference ------------------------------------------------------

    def _prepare(self, p: int, b: int) -> Program:
        yield cell_write(self.pid_cell(b), p)
        yield cell_write(self.seen_cell(b), 0)

    def _mark(self, p: int, r: int) -> Program:
        if r == NIL or not 0 <= r < self.size:
            return
        owner = yield cell_read(self.pid_cell(r))
        if owner == p:
            yield cell_write(self.seen_cell(r), 1)

    def _sweep(self, b: int) -> Program:
        seen = yield cell_read(self.seen_cell(b))
        yield cell_write(self.pid_cell(b), NIL)
        return not seen

    @operation("set_difference")
    def set_difference(self, rlist: Sequence[int], reserved: Sequence[int], p: int) -> Program:
        """``rlist`` minus ``reserved`` in O(|rlist| + |reserved|) steps; leaves every pid reset."""
        for b in rlist:
            yield from self._prepare(p, b)
        for r in reserved:
            yield from self._mark(p, r)
        out = []
        for b in rlist:
            if (yield from self._sweep(b)):
                out.append(b)
        return out

    # -- incremental scan ----------------------------------------------------

    @operation("scan_step", detached=True)
    def scan_step(self, p: int, budget: int) -> Program:
        if budget < 1:
            raise PoolConfigError(f"Scan budget must be at least 1, got {budget}")
        return (yield from self._advance_scan(p, budget))

    @operation("scan", detached=True)
    def _run_scan(self, p: int, budget: Optional[int]) -> Program:
        return (yield from self._advance_scan(p, budget))

    def _advance_scan(self, p: int, budget: Optional[int]) -> Program:
        lists = self._lists[p]
        scan = lists.scan
        if scan is None:
            return ScanProgress.IDLE
        work = 0
        while budget is None or work < budget:
            if scan.phase is _Phase.PREPARE:
                if scan.cursor < len(scan.items):
                    yield from self._prepare(p, scan.items[scan.cursor])
                    scan.cursor += 1
                    work += 1
                    continue
                scan.phase, scan.cursor = _Phase.MARK, 0
            if scan.phase is _Phase.MARK:
                if scan.cursor < self.announcement_count:
                    r = yield from self._read_announcement(p, scan.cursor)
                    yield from self._mark(p, r)
                    scan.cursor += 1
                    work += 1
                    continue
                scan.phase, scan.cursor = _Phase.SWEEP, 0
            if scan.cursor < len(scan.items):
                b = scan.items[scan.cursor]
                if (yield from self._sweep(b)):
                    scan.freed.append(b)
                scan.cursor += 1
                work += 1
                continue
            self._finish_scan(p, lists, scan)
            self._note_units(work)
            return ScanProgress.DONE
        self._note_units(work)
        return ScanProgress.ADVANCED

    def _note_units(self, work: int) -> None:
        if work > self.audit.max_scan_units:
            self.audit.max_scan_units = work

    def _finish_scan(self, p: int, lists: _ProcessLists, scan: _Scan) -> None:
        pair = lists.current if self.mode is PoolMode.AMORTIZED else lists.shadow
        freed = set(scan.freed)
        pair.rlist = [b for b in pair.rlist if b not in freed]
        pair.flist.extend(scan.freed)
        for b in scan.freed:
            self._where[b] = ("free", p)
        lists.scan = None
        transferred, kept = len(scan.freed), len(pair.rlist)
        with self._lock:
            audit = self.audit
            audit.scans += 1
            audit.transferred_total += transferred
            if audit.min_transferred is None or transferred < audit.min_transferred:
                audit.min_transferred = transferred
            audit.max_kept = max(audit.max_kept, kept)
        if self.mode is PoolMode.AMORTIZED:
            logger.debug(f"Process {p} scan transferred {transferred} buffers, kept {kept}")

    # -- audits --------------------------------------------------------------

    def list_sizes(self) -> Dict[int, Tuple[List[int], List[int]]]:
        return {
            p: ([len(pair.flist) for pair in lists.pairs], [len(pair.rlist) for pair in lists.pairs])
            for p, lists in enumerate(self._lists)
        }

    def free_count(self, p: int) -> int:
        return len(self._lists[p].current.flist)

    def retired_count(self, p: int) -> int:
        return len(self._lists[p].current.rlist)

    def snapshot_audit(self) -> PoolAudit:
        audit = self.audit.model_copy(deep=True)
        for p, (free, retired) in self.list_sizes().items():
            audit.free_sizes[p] = free
            audit.retired_sizes[p] = retired
        return audit

    def check_single_state(self, installed: Iterable[int]) -> List[str]:
        """Every pool index is installed or listed exactly once at a quiescent point."""
        counts: Counter = Counter()
        violations: List[str] = []
        for b in installed:
            counts[b] += 1
        for p, lists in enumerate(self._lists):
            for pair in lists.pairs:
                counts.update(pair.flist)
                counts.update(pair.rlist)
        for b in range(self.size):
            n = counts.get(b, 0)
            if n == 0:
                violations.append(f"buffer {b} is neither installed nor listed ({self._where[b][0]})")
            elif n > 1:
                violations.append(f"buffer {b} appears {n} times across objects and lists")
        for b in counts:
            if not 0 <= b < self.size:
                violations.append(f"index {b} is outside the pool")
        return violations
