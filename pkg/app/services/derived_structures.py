"""
Clients of the LL/SC layer: a fetch-and-increment counter and a stack.

Both use lock-free retry loops, so an individual call may retry while other
processes keep succeeding; only the LL/SC primitives underneath are
wait-free. ``TreiberStack`` is the same stack over raw CAS and exists to
show the ABA failure that LL/SC rules out.
"""

from typing import List, Optional

from .buffer_pool import PoolMode
from .llsc import LLSCFamily
from .memcell import NIL, Memory, Program, cell_cas, cell_read, cell_write, operation


class StackCapacityError(RuntimeError):
    pass


class LLSCCounter:
    def __init__(self, memory: Memory, num_processes: int, initial: int = 0, mode: PoolMode = PoolMode.DEAMORTIZED, scan_budget: Optional[int] = None):
        self.llsc = LLSCFamily(memory, 1, num_processes, initial_values=[initial], mode=mode, scan_budget=scan_budget)

    @operation("counter_increment")
    def increment(self, p: int) -> Program:
        while True:
            (v,), h = yield from self.llsc.ll(0, p)
            if (yield from self.llsc.sc(0, p, (v + 1,), h)):
                return v + 1

    @operation("counter_read")
    def read(self, p: int) -> Program:
        (v,), h = yield from self.llsc.ll(0, p)
        yield from self.llsc.cl(0, p, h)
        return v

    def value(self) -> int:
        return self.llsc.value_of(0)[0]


class _NodeArena:
    """Preallocated nodes (value, next) with per-process free lists."""

    def __init__(self, memory: Memory, num_processes: int, nodes_per_process: int):
        total = num_processes * nodes_per_process
        self.value_base = memory.alloc(total, 0)
        self.next_base = memory.alloc(total, NIL)
        self.free: List[List[int]] = [
            list(range((p + 1) * nodes_per_process - 1, p * nodes_per_process - 1, -1)) for p in range(num_processes)
        ]

    def take(self, p: int) -> int:
        if not self.free[p]:
            raise StackCapacityError(f"Process {p} has no free stack nodes")
        return self.free[p].pop()

    def give(self, p: int, n: int) -> None:
        self.free[p].append(n)


class LLSCStack:
    """Stack whose head is an LL/SC object; popped nodes are reused at once.

    Each process starts with ``nodes_per_process`` nodes of its own. A push
    takes a node from the pusher's list and a pop gives it to the popper's
    list, so nodes drift towards poppers. Size the arena for the most pushes
    any process makes beyond the pops it has done; a push with no node left
    raises ``StackCapacityError``.
    """

    def __init__(
        self,
        memory: Memory,
        num_processes: int,
        nodes_per_process: int,
        mode: PoolMode = PoolMode.DEAMORTIZED,
        scan_budget: Optional[int] = None,
    ):
        self.nodes = _NodeArena(memory, num_processes, nodes_per_process)
        self.memory = memory
        self.head = LLSCFamily(memory, 1, num_processes, initial_values=[NIL], mode=mode, scan_budget=scan_budget)

    @operation("stack_push")
    def push(self, p: int, v: int) -> Program:
        n = self.nodes.take(p)
        yield cell_write(self.nodes.value_base + n, v)
        while True:
            (top,), h = yield from self.head.ll(0, p)
            yield cell_write(self.nodes.next_base + n, top)
            if (yield from self.head.sc(0, p, (n,), h)):
                return None

    @operation("stack_pop")
    def pop(self, p: int) -> Program:
        while True:
            (top,), h = yield from self.head.ll(0, p)
            if top == NIL:
                yield from self.head.cl(0, p, h)
                return None
            nxt = yield cell_read(self.nodes.next_base + top)
            v = yield cell_read(self.nodes.value_base + top)
            if (yield from self.head.sc(0, p, (nxt,), h)):
                self.nodes.give(p, top)
                return v

    def contents(self) -> List[int]:
        """Values from top to bottom, read outside any operation."""
        out = []
        n = self.head.value_of(0)[0]
        while n != NIL:
            out.append(self.memory.peek(self.nodes.value_base + n))
            n = self.memory.peek(self.nodes.next_base + n)
        return out


class TreiberStack:
    """The same stack over a raw CAS head; node reuse makes it ABA-prone."""

    def __init__(self, memory: Memory, num_processes: int, nodes_per_process: int):
        self.nodes = _NodeArena(memory, num_processes, nodes_per_process)
        self.memory = memory
        self.head = memory.alloc(1, NIL)

    @operation("treiber_push")
    def push(self, p: int, v: int) -> Program:
        n = self.nodes.take(p)
        yield cell_write(self.nodes.value_base + n, v)
        while True:
            top = yield cell_read(self.head)
            yield cell_write(self.nodes.next_base + n, top)
            if (yield cell_cas(self.head, top, n)):
                return None

    @operation("treiber_pop")
    def pop(self, p: int) -> Program:
        while True:
            top = yield cell_read(self.head)
            if top == NIL:
                return None
            nxt = yield cell_read(self.nodes.next_base + top)
            v = yield cell_read(self.nodes.value_base + top)
            if (yield cell_cas(self.head, top, nxt)):
                self.nodes.give(p, top)
                return v

    def contents(self) -> List[int]:
        out = []
        n = self.memory.peek(self.head)
        seen = set()
        while n != NIL and n not in seen:
            seen.add(n)
            out.append(self.memory.peek(self.nodes.value_base + n))
            n = self.memory.peek(self.nodes.next_base + n)
        return out
