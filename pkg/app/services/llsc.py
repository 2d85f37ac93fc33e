import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

from .buffer_pool import BufferPool, PoolMode, make_pool_config
from .memcell import NIL, Memory, Program, cell_cas, cell_read, operation
from .swcopy import DestinationFamily
from .weak_llsc import Mutation, Value, ValueLike, as_value, initial_table

logger = logging.getLogger("LLSC")

SPACE_CONSTANT = 40


class HandleError(ValueError):
    pass


class OutstandingLimitError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class SlotHandle:
    slot: int


class LLResult(NamedTuple):
    value: Value
    handle: SlotHandle


class LLSCFamily:
    """
    M LL/SC objects over L-word values; each process may hold up to k links.

    ``ll`` never fails: it announces the object's buffer with a swcopy from the
    object's ``buf`` cell into the caller's announcement Destination, so the
    announced buffer is protected from reclamation at the instant it is read.
    """

    def __init__(
        self,
        memory: Memory,
        num_objects: int,
        num_processes: int,
        outstanding: int = 1,
        width: int = 1,
        initial_values: Optional[Iterable[ValueLike]] = None,
        mode: PoolMode = PoolMode.DEAMORTIZED,
        scan_budget: Optional[int] = None,
        mutations: Iterable[Mutation] = (),
    ):
        start = memory.size
        self.cfg = make_pool_config(num_objects, num_processes, outstanding, width)
        self.memory = memory
        self.width = width
        k = outstanding
        values = initial_table(initial_values, num_objects, width)

        # Entry p*k + j is A[p][j], owned by p; NIL means the slot is idle.
        self.announcements = DestinationFamily(
            memory,
            owners=[p for p in range(num_processes) for _ in range(k)],
            num_processes=num_processes,
            initial=NIL,
            mode=mode,
            scan_budget=scan_budget,
            mutations=mutations,
        )
        self.pool = BufferPool(memory, self.cfg, num_processes * k, self._read_announcement, mode, scan_budget)
        self.buf_base = memory.alloc(num_objects, 0)
        for x, value in enumerate(values):
            memory.poke(self.buf_base + x, x)
            self.pool.seed_value(x, value)

        self._free_slots: List[List[int]] = [list(range(k - 1, -1, -1)) for _ in range(num_processes)]
        self._links: List[Dict[int, int]] = [{} for _ in range(num_processes)]
        self.allocated_words = memory.size - start
        logger.info(
            f"Created {num_objects} LL/SC objects for {num_processes} processes "
            f"(k={k}, L={width}, shared words={self.allocated_words})"
        )

    def _ann(self, p: int, slot: int) -> int:
        return p * self.cfg.outstanding + slot

    def _read_announcement(self, p: int, i: int) -> Program:
        return (yield from self.announcements.read(i, p))

    def _check(self, x: int, p: int) -> None:
        if not 0 <= x < self.cfg.objects:
            raise IndexError(f"Object {x} out of range (M={self.cfg.objects})")
        if not 0 <= p < self.cfg.processes:
            raise IndexError(f"Process {p} out of range (P={self.cfg.processes})")

    def _linked_slot(self, x: int, p: int, h: SlotHandle, consume: bool) -> int:
        slot = h.slot if isinstance(h, SlotHandle) else None
        if slot is None or self._links[p].get(slot) != x:
            logger.error(f"Process {p} used handle {h!r} on object {x} without a matching ll")
            raise HandleError(f"Handle {h!r} is not an outstanding link of process {p} on object {x}")
        if consume:
            del self._links[p][slot]
        return slot

    def outstanding(self, p: int) -> int:
        return len(self._links[p])

    def free_slots(self, p: int) -> Tuple[int, ...]:
        return tuple(self._free_slots[p])

    @operation("ll")
    def ll(self, x: int, p: int) -> Program:
        self._check(x, p)
        free = self._free_slots[p]
        if not free:
            logger.error(f"Process {p} exceeded {self.cfg.outstanding} outstanding links")
            raise OutstandingLimitError(f"Process {p} already holds {self.cfg.outstanding} outstanding links")
        slot = free.pop()
        self._links[p][slot] = x
        a = self._ann(p, slot)
        yield from self.announcements.swcopy(a, p, self.buf_base + x)
        tmp = yield from self.announcements.read(a, p)
        value = yield from self.pool.read_value(tmp)
        return LLResult(value, SlotHandle(slot))

    @operation("llsc_vl")
    def vl(self, x: int, p: int, h: SlotHandle) -> Program:
        self._check(x, p)
        slot = self._linked_slot(x, p, h, consume=False)
        old = yield from self.announcements.read(self._ann(p, slot), p)
        return (yield cell_read(self.buf_base + x)) == old

    @operation("sc")
    def sc(self, x: int, p: int, new_value: ValueLike, h: SlotHandle) -> Program:
        self._check(x, p)
        value = as_value(new_value, self.width)
        slot = self._linked_slot(x, p, h, consume=True)
        a = self._ann(p, slot)
        old = yield from self.announcements.read(a, p)
        b = yield from self.pool.acquire(p)
        yield from self.pool.write_value(b, value)
        ok = yield cell_cas(self.buf_base + x, old, b)
        if ok:
            self.pool.mark_installed(p, b)
            yield from self.pool.retire(p, old)
        else:
            self.pool.restore(p, b)
        yield from self.announcements.write(a, p, NIL)
        self._free_slots[p].append(slot)
        return ok

    @operation("cl")
    def cl(self, x: int, p: int, h: SlotHandle) -> Program:
        self._check(x, p)
        slot = self._linked_slot(x, p, h, consume=True)
        yield from self.announcements.write(self._ann(p, slot), p, NIL)
        self._free_slots[p].append(slot)

    # -- audits --------------------------------------------------------------

    def installed(self) -> List[int]:
        return [self.memory.peek(self.buf_base + x) for x in range(self.cfg.objects)]

    def value_of(self, x: int) -> Value:
        b = self.memory.peek(self.buf_base + x)
        return tuple(self.memory.peek(self.pool.payload_cell(b, j)) for j in range(self.width))

    def check_single_state(self) -> List[str]:
        return self.pool.check_single_state(self.installed()) + self.announcements.check_single_state()

    def check_slots(self) -> List[str]:
        violations = []
        k = self.cfg.outstanding
        for p in range(self.cfg.processes):
            free, links = self._free_slots[p], self._links[p]
            if len(free) + len(links) != k or set(free) & set(links):
                violations.append(f"process {p}: free slots {free} and links {sorted(links)} do not partition 0..{k - 1}")
        return violations

    def space_limit(self) -> int:
        cfg = self.cfg
        return SPACE_CONSTANT * (cfg.objects + cfg.outstanding * cfg.processes ** 2) * cfg.width


class SingleLLSC:
    """Handle-free LL/SC (one outstanding link per process) over ``LLSCFamily`` with k=1."""

    def __init__(self, memory: Memory, num_objects: int, num_processes: int, width: int = 1, **kwargs):
        self.family = LLSCFamily(memory, num_objects, num_processes, outstanding=1, width=width, **kwargs)
        self._handles: Dict[int, Tuple[int, SlotHandle]] = {}

    def _handle(self, x: int, p: int) -> SlotHandle:
        held = self._handles.get(p)
        if held is None or held[0] != x:
            raise HandleError(f"Process {p} has no outstanding link on object {x}")
        return held[1]

    def ll(self, x: int, p: int) -> Program:
        value, handle = yield from self.family.ll(x, p)
        self._handles[p] = (x, handle)
        return value

    def vl(self, x: int, p: int) -> Program:
        return (yield from self.family.vl(x, p, self._handle(x, p)))

    def sc(self, x: int, p: int, new_value: ValueLike) -> Program:
        handle = self._handle(x, p)
        del self._handles[p]
        return (yield from self.family.sc(x, p, new_value, handle))

    def cl(self, x: int, p: int) -> Program:
        handle = self._handle(x, p)
        del self._handles[p]
        yield from self.family.cl(x, p, handle)
