import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .buffer_pool import BufferPool, PoolConfigError, PoolMode, make_pool_config
from .memcell import NIL, Memory, Program, cell_cas, cell_read, cell_write, operation

logger = logging.getLogger("WeakLLSC")

Value = Tuple[int, ...]
ValueLike = Union[int, Sequence[int]]


class Mutation(str, Enum):
    """Deliberately broken builds used to show the checker catches real bugs."""
    SKIP_RECHECK = "skip-recheck"
    SKIP_HELP = "skip-help"


class WLLStatus(str, Enum):
    VALUE = "value"
    EMPTY = "empty"


@dataclass(frozen=True, slots=True)
class WLLResult:
    status: WLLStatus
    value: Optional[Value] = None

    @property
    def ok(self) -> bool:
        return self.status is WLLStatus.VALUE


EMPTY = WLLResult(WLLStatus.EMPTY)


@dataclass(frozen=True)
class WeakLayout:
    """Cell ranges of one family, used by post-hoc step-log audits."""
    buf_base: int
    objects: int
    ann_base: int
    processes: int
    val_base: int
    width: int
    pool_size: int

    def buf_cell(self, x: int) -> int:
        return self.buf_base + x

    def ann_cell(self, p: int) -> int:
        return self.ann_base + p

    def is_buf(self, c: int) -> bool:
        return self.buf_base <= c < self.buf_base + self.objects

    def is_ann(self, c: int) -> bool:
        return self.ann_base <= c < self.ann_base + self.processes

    def payload_owner(self, c: int) -> Optional[int]:
        """Buffer index whose payload contains cell ``c``, if any."""
        offset = c - self.val_base
        if 0 <= offset < self.pool_size * self.width:
            return offset // self.width
        return None


def as_value(v: ValueLike, width: int) -> Value:
    value = (v,) if isinstance(v, int) else tuple(v)
    if len(value) != width:
        raise PoolConfigError(f"Value {value!r} has {len(value)} words, family width is {width}")
    return value


def initial_table(initial_values: Optional[Iterable[ValueLike]], count: int, width: int) -> List[Value]:
    if initial_values is None:
        return [(0,) * width] * count
    values = [as_value(v, width) for v in initial_values]
    if len(values) != count:
        raise PoolConfigError(f"Expected {count} initial values, got {len(values)}")
    return values


class WeakLLSCFamily:
    """M weak LL/SC objects over L-word values sharing one buffer pool.

    ``wll`` may come back empty, but only when a successful ``wsc`` on the
    same object overlapped it. Each process may have one outstanding ``wll``
    across the whole family.
    """

    def __init__(
        self,
        memory: Memory,
        num_objects: int,
        num_processes: int,
        width: int = 1,
        initial_values: Optional[Iterable[ValueLike]] = None,
        mode: PoolMode = PoolMode.DEAMORTIZED,
        scan_budget: Optional[int] = None,
        mutations: Iterable[Mutation] = (),
    ):
        start = memory.size
        self.cfg = make_pool_config(num_objects, num_processes, 1, width)
        self.memory = memory
        self.width = width
        self.mutations = frozenset(Mutation(m) for m in mutations)
        values = initial_table(initial_values, num_objects, width)

        self.ann_base = memory.alloc(num_processes, NIL)
        self.pool = BufferPool(memory, self.cfg, num_processes, self._read_announcement, mode, scan_budget)
        self.buf_base = memory.alloc(num_objects, 0)
        for x, value in enumerate(values):
            memory.poke(self.buf_base + x, x)
            self.pool.seed_value(x, value)
        self.allocated_words = memory.size - start
        logger.info(
            f"Created {num_objects} weak LL/SC objects for {num_processes} processes "
            f"(L={width}, pool={self.pool.size}, mode={self.pool.mode.value})"
        )

    def _read_announcement(self, p: int, i: int) -> Program:
        return (yield cell_read(self.ann_base + i))

    def _check(self, x: int, p: int) -> None:
        if not 0 <= x < self.cfg.objects:
            raise IndexError(f"Object {x} out of range (M={self.cfg.objects})")
        if not 0 <= p < self.cfg.processes:
            raise IndexError(f"Process {p} out of range (P={self.cfg.processes})")

    @operation("wll", unit=True)
    def wll(self, x: int, p: int) -> Program:
        self._check(x, p)
        buf = self.buf_base + x
        tmp = yield cell_read(buf)
        yield cell_write(self.ann_base + p, tmp)
        if Mutation.SKIP_RECHECK not in self.mutations:
            if (yield cell_read(buf)) != tmp:
                return EMPTY
        value = yield from self.pool.read_value(tmp)
        return WLLResult(WLLStatus.VALUE, value)

    @operation("vl", unit=True)
    def vl(self, x: int, p: int) -> Program:
        self._check(x, p)
        old = yield cell_read(self.ann_base + p)
        return (yield cell_read(self.buf_base + x)) == old

    @operation("wsc", unit=True)
    def wsc(self, x: int, p: int, new_value: ValueLike) -> Program:
        self._check(x, p)
        value = as_value(new_value, self.width)
        old = yield cell_read(self.ann_base + p)
        b = yield from self.pool.acquire(p)
        yield from self.pool.write_value(b, value)
        ok = yield cell_cas(self.buf_base + x, old, b)
        if ok:
            self.pool.mark_installed(p, b)
            yield from self.pool.retire(p, old)
        else:
            self.pool.restore(p, b)
        yield cell_write(self.ann_base + p, NIL)
        return ok

    # -- audits --------------------------------------------------------------

    def layout(self) -> WeakLayout:
        return WeakLayout(
            buf_base=self.buf_base,
            objects=self.cfg.objects,
            ann_base=self.ann_base,
            processes=self.cfg.processes,
            val_base=self.pool.val_base,
            width=self.width,
            pool_size=self.pool.size,
        )

    def installed(self) -> List[int]:
        return [self.memory.peek(self.buf_base + x) for x in range(self.cfg.objects)]

    def value_of(self, x: int) -> Value:
        """Current value read outside any operation (quiescent audits and tests)."""
        b = self.memory.peek(self.buf_base + x)
        return tuple(self.memory.peek(self.pool.payload_cell(b, j)) for j in range(self.width))

    def check_single_state(self) -> List[str]:
        return self.pool.check_single_state(self.installed())
