"""
Word-sized shared cells with two interchangeable backends.

Every algorithm in this package is written as a *program*: a generator that
yields shared-step requests built with ``cell_read``/``cell_write``/``cell_cas``
and receives each step's result back. ``HardwareMemory.run`` drives a program
to completion on lock-protected cells; ``run_under_scheduler`` interleaves
several programs on a ``SimulatedMemory`` one shared step at a time.

    def incr(c):
        v = yield cell_read(c)
        return (yield cell_cas(c, v, v + 1))

    memory = HardwareMemory()
    c = memory.alloc(1)
    memory.run(0, incr(c))
"""

import functools
import json
import logging
import os
import random
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Generator, Iterator, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel

logger = logging.getLogger("Scheduler")

WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1
# All-ones word; never a valid BufferIndex so index 0 stays usable.
NIL = WORD_MASK
DEFAULT_EXPLORATION_BUDGET = 1_000_000
DEFAULT_STEP_LIMIT = 100_000

Word = int
CellId = int
Program = Generator[Any, Any, Any]


def default_exploration_budget() -> int:
    """Interleaving cap, overridable through LLSC_EXPLORATION_BUDGET."""
    raw = os.getenv("LLSC_EXPLORATION_BUDGET")
    if not raw:
        return DEFAULT_EXPLORATION_BUDGET
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring invalid LLSC_EXPLORATION_BUDGET={raw!r}")
        return DEFAULT_EXPLORATION_BUDGET


class MemoryModelError(RuntimeError):
    pass


class SchedulerError(RuntimeError):
    pass


class StepKind(str, Enum):
    READ = "read"
    WRITE = "write"
    CAS = "cas"


@dataclass(frozen=True, slots=True)
class Access:
    """One shared step requested by a program."""
    kind: StepKind
    cell: CellId
    args: Tuple[Word, ...] = ()
    copy: bool = False  # payload word of an L-word value


@dataclass(frozen=True, slots=True)
class OpStart:
    label: str
    unit: bool = False
    detached: bool = False


@dataclass(frozen=True, slots=True)
class OpEnd:
    label: str


@dataclass(frozen=True, slots=True)
class Note:
    kind: str
    payload: Any = None


def cell_read(c: CellId, copy: bool = False) -> Access:
    return Access(StepKind.READ, c, (), copy)


def cell_write(c: CellId, v: Word, copy: bool = False) -> Access:
    return Access(StepKind.WRITE, c, (v & WORD_MASK,), copy)


def cell_cas(c: CellId, expected: Word, desired: Word) -> Access:
    return Access(StepKind.CAS, c, (expected & WORD_MASK, desired & WORD_MASK))


def operation(label: str, *, unit: bool = False, detached: bool = False):
    """Bracket a program with frame markers so the StepCounter can attribute its steps."""
    start = OpStart(label, unit, detached)
    end = OpEnd(label)

    def decorate(fn: Callable[..., Program]) -> Callable[..., Program]:
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            yield start
            result = yield from fn(*args, **kwargs)
            yield end
            return result
        return wrapper
    return decorate


# ---------------------------------------------------------------------------
# Step accounting
# ---------------------------------------------------------------------------


class OpStats(BaseModel):
    """Per-label instrumentation totals."""
    count: int = 0
    max_raw: int = 0
    max_units: int = 0
    max_copies: int = 0

    def absorb(self, other: "OpStats") -> None:
        self.count += other.count
        self.max_raw = max(self.max_raw, other.max_raw)
        self.max_units = max(self.max_units, other.max_units)
        self.max_copies = max(self.max_copies, other.max_copies)


@dataclass(slots=True)
class _Frame:
    label: str
    unit: bool
    detached: bool
    raw: int = 0
    units: int = 0
    copies: int = 0


class StepCounter:
    """Per-process shared-step counts keyed by operation label.

    ``raw`` counts every structural shared step inside a frame (nested frames
    included). ``units`` counts a weak primitive (unit frame) as a single step
    and stops at detached frames (reclamation scans). Copy steps only feed
    ``copies``.
    """

    def __init__(self):
        self._stacks: Dict[int, List[_Frame]] = defaultdict(list)
        self._stats: Dict[int, Dict[str, OpStats]] = defaultdict(dict)
        self.steps: Dict[int, int] = defaultdict(int)

    def enter(self, pid: int, marker: OpStart) -> None:
        stack = self._stacks[pid]
        if marker.unit:
            for frame in reversed(stack):
                if frame.unit:
                    break
                frame.units += 1
                if frame.detached:
                    break
        stack.append(_Frame(marker.label, marker.unit, marker.detached))

    def exit(self, pid: int, marker: OpEnd) -> None:
        stack = self._stacks[pid]
        if not stack or stack[-1].label != marker.label:
            raise MemoryModelError(f"Unbalanced frame {marker.label!r} for process {pid}")
        frame = stack.pop()
        stats = self._stats[pid].get(frame.label)
        if stats is None:
            stats = self._stats[pid][frame.label] = OpStats()
        stats.count += 1
        stats.max_raw = max(stats.max_raw, frame.raw)
        stats.max_units = max(stats.max_units, frame.units)
        stats.max_copies = max(stats.max_copies, frame.copies)

    def record(self, pid: int, access: Access) -> None:
        self.steps[pid] += 1
        stack = self._stacks[pid]
        if access.copy:
            for frame in stack:
                frame.copies += 1
            return
        counting_units = True
        for frame in reversed(stack):
            frame.raw += 1
            if counting_units:
                frame.units += 1
                if frame.unit or frame.detached:
                    counting_units = False

    def unwind(self, pid: int) -> None:
        self._stacks[pid].clear()

    def reset_stacks(self) -> None:
        for stack in self._stacks.values():
            stack.clear()

    def per_process(self) -> Dict[int, Dict[str, OpStats]]:
        return {pid: {k: v.model_copy() for k, v in stats.items()} for pid, stats in self._stats.items()}

    def merged(self) -> Dict[str, OpStats]:
        totals: Dict[str, OpStats] = {}
        for pid in sorted(self._stats):
            for label, stats in self._stats[pid].items():
                totals.setdefault(label, OpStats()).absorb(stats)
        return dict(sorted(totals.items()))


# ---------------------------------------------------------------------------
# Memories
# ---------------------------------------------------------------------------


class Memory:
    """Flat array of word cells addressed by CellId."""

    def __init__(self, counter: Optional[StepCounter] = None):
        self._cells: List[Word] = []
        self._frozen = False
        self.counter = counter

    # -- setup (not shared steps) ------------------------------------------

    def alloc(self, count: int, initial: Word = 0) -> CellId:
        if self._frozen:
            raise MemoryModelError("Allocation after initialization is not allowed")
        if count < 0:
            raise MemoryModelError(f"Cannot allocate {count} cells")
        base = len(self._cells)
        self._cells.extend([initial & WORD_MASK] * count)
        return base

    def poke(self, c: CellId, v: Word) -> None:
        self._check(c)
        self._cells[c] = v & WORD_MASK

    def peek(self, c: CellId) -> Word:
        self._check(c)
        return self._cells[c]

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def size(self) -> int:
        return len(self._cells)

    def snapshot(self) -> List[Word]:
        return list(self._cells)

    def _check(self, c: CellId) -> None:
        if not 0 <= c < len(self._cells):
            raise MemoryModelError(f"Unknown cell {c}")

    # -- shared steps ------------------------------------------------------

    def perform(self, pid: int, access: Access) -> Any:
        raise NotImplementedError

    # -- markers -------------------------------------------------------------

    def enter(self, pid: int, marker: OpStart) -> None:
        if self.counter is not None:
            self.counter.enter(pid, marker)

    def exit(self, pid: int, marker: OpEnd) -> None:
        if self.counter is not None:
            self.counter.exit(pid, marker)

    def note(self, pid: int, note: Note) -> None:
        pass

    def unwind(self, pid: int) -> None:
        if self.counter is not None:
            self.counter.unwind(pid)

    def run(self, pid: int, program: Program) -> Any:
        """Drive ``program`` to completion as process ``pid``."""
        return Process(self, pid, program).run()


class HardwareMemory(Memory):
    """Cells shared between real threads; every step is sequentially consistent.

    Writes and CAS take a striped lock so a CAS never interleaves with another
    modification of the same cell; reads of a list slot are atomic already.
    """

    STRIPES = 64

    def __init__(self, counter: Optional[StepCounter] = None):
        super().__init__(counter)
        self._locks = [threading.Lock() for _ in range(self.STRIPES)]

    def perform(self, pid: int, access: Access) -> Any:
        if self.counter is not None:
            self.counter.record(pid, access)
        cells = self._cells
        c = access.cell
        if access.kind is StepKind.READ:
            return cells[c]
        with self._locks[c % self.STRIPES]:
            if access.kind is StepKind.WRITE:
                cells[c] = access.args[0]
                return None
            if cells[c] == access.args[0]:
                cells[c] = access.args[1]
                return True
            return False


class SimulatedMemory(Memory):
    """Single-threaded memory that logs every step in its global order.

    Step records are ``(seq, proc, cell, kind, args, result, copy)`` tuples and
    note records ``(seq, proc, kind, payload)``; both share one sequence.
    """

    def __init__(self, counter: Optional[StepCounter] = None):
        super().__init__(counter)
        self.steps: List[tuple] = []
        self.notes: List[tuple] = []
        self._seq = 0
        self.initial: List[Word] = []

    def freeze(self) -> None:
        super().freeze()
        self.initial = list(self._cells)

    def perform(self, pid: int, access: Access) -> Any:
        if self.counter is not None:
            self.counter.record(pid, access)
        cells = self._cells
        c = access.cell
        if access.kind is StepKind.READ:
            result = cells[c]
        elif access.kind is StepKind.WRITE:
            cells[c] = access.args[0]
            result = None
        elif cells[c] == access.args[0]:
            cells[c] = access.args[1]
            result = True
        else:
            result = False
        self.steps.append((self._seq, pid, c, access.kind.value, access.args, result, access.copy))
        self._seq += 1
        return result

    def enter(self, pid: int, marker: OpStart) -> None:
        super().enter(pid, marker)
        self._record_note(pid, "enter", marker.label)

    def exit(self, pid: int, marker: OpEnd) -> None:
        super().exit(pid, marker)
        self._record_note(pid, "exit", marker.label)

    def note(self, pid: int, note: Note) -> None:
        self._record_note(pid, note.kind, note.payload)

    def _record_note(self, pid: int, kind: str, payload: Any) -> None:
        self.notes.append((self._seq, pid, kind, payload))
        self._seq += 1


def replay(initial: Sequence[Word], steps: Sequence[tuple]) -> List[Word]:
    """Recompute cell values from a step log; raises if a logged result disagrees."""
    cells = list(initial)
    for seq, proc, c, kind, args, result, _copy in steps:
        if kind == StepKind.READ.value:
            expected = cells[c]
        elif kind == StepKind.WRITE.value:
            cells[c] = args[0]
            expected = None
        elif cells[c] == args[0]:
            cells[c] = args[1]
            expected = True
        else:
            expected = False
        if expected != result:
            raise MemoryModelError(f"Step {seq} by process {proc} on cell {c} is not explained by replay")
    return cells


# ---------------------------------------------------------------------------
# Processes
# ---------------------------------------------------------------------------


class Process:
    """A program bound to a process id, advanced one shared step at a time."""

    def __init__(self, memory: Memory, pid: int, program: Program):
        self.memory = memory
        self.pid = pid
        self._program = program
        self.pending: Optional[Access] = None
        self.done = False
        self.result: Any = None
        self.completed_ops = 0
        self._depth = 0
        self._deferred: List[Note] = []
        self._advance(None)

    def _advance(self, value: Any) -> None:
        memory = self.memory
        while True:
            try:
                item = self._program.send(value)
            except StopIteration as stop:
                self.done = True
                self.result = stop.value
                self.pending = None
                self._flush()
                return
            except BaseException:
                memory.unwind(self.pid)
                raise
            value = None
            if type(item) is Access:
                self.pending = item
                return
            if type(item) is OpStart:
                self._depth += 1
                memory.enter(self.pid, item)
            elif type(item) is OpEnd:
                self._depth -= 1
                memory.exit(self.pid, item)
                if self._depth == 0:
                    self.completed_ops += 1
            elif type(item) is Note:
                if item.kind == "invoke":
                    self._deferred.append(item)
                else:
                    self._flush()
                    memory.note(self.pid, item)
            else:
                raise SchedulerError(f"Process {self.pid} yielded {item!r}, expected a shared step")

    def _flush(self) -> None:
        if self._deferred:
            for note in self._deferred:
                self.memory.note(self.pid, note)
            self._deferred.clear()

    def step(self) -> Any:
        if self.pending is None:
            raise SchedulerError(f"Process {self.pid} has no pending step")
        self._flush()
        value = self.memory.perform(self.pid, self.pending)
        self._advance(value)
        return value

    def run(self) -> Any:
        while not self.done:
            self.step()
        return self.result

    def close(self) -> None:
        self._program.close()
        self.memory.unwind(self.pid)


# ---------------------------------------------------------------------------
# Scheduler
# ---------------------------------------------------------------------------


class Strategy(str, Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOM = "random"
    PCT = "pct"
    DIRECTED = "directed"


class ExecutionStatus(str, Enum):
    COMPLETE = "complete"
    STEP_LIMIT = "step_limit"
    ERROR = "error"


@dataclass(frozen=True, slots=True)
class Segment:
    """Directed-schedule segment: run ``pid`` for ``steps`` shared steps or until it completes ``ops`` operations."""
    pid: int
    steps: Optional[int] = None
    ops: Optional[int] = None


class StepRecord(BaseModel):
    proc: int
    cell: int
    kind: str
    args: List[int]
    result: Optional[Any] = None
    seq: int
    copy_step: bool = False


class NoteRecord(BaseModel):
    proc: int
    kind: str
    payload: Optional[Any] = None
    seq: int


@dataclass
class Execution:
    """One explored interleaving."""
    index: int
    schedule: List[int]
    status: ExecutionStatus
    initial: List[Word]
    final: List[Word]
    steps: List[tuple]
    notes: List[tuple]
    results: Dict[int, Any]
    context: Any = None
    error: Optional[str] = None

    def step_records(self) -> List[StepRecord]:
        return [
            StepRecord(seq=s, proc=p, cell=c, kind=k, args=list(a), result=r, copy_step=cp)
            for s, p, c, k, a, r, cp in self.steps
        ]

    def to_jsonl(self) -> str:
        """One JSON object per step: {proc, cell, kind, args, result, seq}."""
        return "\n".join(
            json.dumps({"proc": p, "cell": c, "kind": k, "args": list(a), "result": r, "seq": s})
            for s, p, c, k, a, r, _cp in self.steps
        )


class ExplorationResult(BaseModel):
    strategy: Strategy
    interleavings: int
    truncated: bool
    step_limited: int = 0
    errored: int = 0
    executions: List[Any] = []

    model_config = {"arbitrary_types_allowed": True}


ProgramFactory = Callable[[SimulatedMemory], Tuple[Mapping[int, Program], Any]]


@dataclass
class _Choice:
    options: List[int]
    chosen: int
    preemptions: int
    previous: Optional[int]


class Scheduler:
    """Runs the processes of a program factory under one scheduling strategy.

    The factory receives a fresh ``SimulatedMemory`` and returns
    ``(processes, context)``; it is called once per execution, so exhaustive
    exploration is a stateless DFS over scheduling choices that replays each
    prefix from the initial configuration.
    """

    def __init__(
        self,
        factory: ProgramFactory,
        strategy: Strategy = Strategy.EXHAUSTIVE,
        budget: Optional[int] = None,
        seed: int = 0,
        preemption_bound: Optional[int] = None,
        schedule: Optional[Sequence[Segment]] = None,
        pct_depth: int = 3,
        step_limit: int = DEFAULT_STEP_LIMIT,
        counter: Optional[StepCounter] = None,
    ):
        self.factory = factory
        self.strategy = Strategy(strategy)
        self.budget = budget if budget is not None else default_exploration_budget()
        if self.budget < 1:
            raise SchedulerError("Exploration budget must be at least 1")
        self.seed = seed
        self.preemption_bound = preemption_bound
        self.schedule = list(schedule or [])
        self.pct_depth = max(1, pct_depth)
        self.step_limit = step_limit
        self.counter = counter
        self.interleavings = 0
        self.truncated = False
        self.step_limited = 0
        self.errored = 0

    # -- single execution ------------------------------------------------------

    def _start(self, memory: SimulatedMemory, programs: Mapping[int, Program]) -> Tuple[Dict[int, Process], Optional[str]]:
        processes: Dict[int, Process] = {}
        for pid in sorted(programs):
            try:
                processes[pid] = Process(memory, pid, programs[pid])
            except SchedulerError:
                raise
            except Exception as e:
                return processes, self._failure(pid, e)
        return processes, None

    def _step(self, proc: Process) -> Optional[str]:
        """Take one step of ``proc``; an exception from its program ends the execution and is returned as text."""
        try:
            proc.step()
        except SchedulerError:
            raise
        except Exception as e:
            return self._failure(proc.pid, e)
        return None

    @staticmethod
    def _failure(pid: int, e: Exception) -> str:
        message = f"process {pid} raised {type(e).__name__}: {e}"
        logger.debug(message)
        return message

    def _abort(self, processes: Mapping[int, Process]) -> None:
        for proc in processes.values():
            if not proc.done:
                proc.close()
        if self.counter is not None:
            self.counter.reset_stacks()

    def _execute(self, index: int, choose: Callable[[List[int], Optional[int], int], int]) -> Execution:
        memory = SimulatedMemory(self.counter)
        programs, context = self.factory(memory)
        memory.freeze()
        processes, error = self._start(memory, programs)
        schedule: List[int] = []
        previous: Optional[int] = None
        status = ExecutionStatus.COMPLETE if error is None else ExecutionStatus.ERROR
        while status is ExecutionStatus.COMPLETE:
            enabled = [pid for pid, proc in processes.items() if not proc.done]
            if not enabled:
                break
            if len(schedule) >= self.step_limit:
                status = ExecutionStatus.STEP_LIMIT
                break
            pid = enabled[0] if len(enabled) == 1 else choose(enabled, previous, len(schedule))
            error = self._step(processes[pid])
            schedule.append(pid)
            previous = pid
            if error is not None:
                status = ExecutionStatus.ERROR
        if status is not ExecutionStatus.COMPLETE:
            self._abort(processes)
        return Execution(
            index=index,
            schedule=schedule,
            status=status,
            initial=memory.initial,
            final=memory.snapshot(),
            steps=memory.steps,
            notes=memory.notes,
            results={pid: proc.result for pid, proc in processes.items()},
            context=context,
            error=error,
        )

    # -- strategies ------------------------------------------------------------

    def executions(self) -> Iterator[Execution]:
        self.interleavings = 0
        self.truncated = False
        self.step_limited = 0
        self.errored = 0
        if self.strategy is Strategy.EXHAUSTIVE:
            source = self._exhaustive()
        elif self.strategy is Strategy.DIRECTED:
            source = self._directed()
        else:
            source = self._sampled()
        for execution in source:
            self.interleavings += 1
            if execution.status is ExecutionStatus.STEP_LIMIT:
                self.step_limited += 1
            elif execution.status is ExecutionStatus.ERROR:
                self.errored += 1
            yield execution
        if self.truncated:
            logger.warning(f"Exploration truncated after {self.interleavings} interleavings (budget {self.budget})")
        else:
            logger.info(f"Exploration finished: {self.interleavings} interleavings ({self.strategy.value})")

    def _exhaustive(self) -> Iterator[Execution]:
        path: List[_Choice] = []
        bound = self.preemption_bound
        index = 0
        while True:
            depth = 0
            preemptions = 0

            def choose(enabled: List[int], previous: Optional[int], _step: int) -> int:
                nonlocal depth, preemptions
                if depth < len(path):
                    node = path[depth]
                    if node.options != _ordered(enabled, previous):
                        raise SchedulerError("Program is not deterministic under replay")
                else:
                    node = _Choice(_ordered(enabled, previous), 0, preemptions, previous)
                    path.append(node)
                depth += 1
                pid = node.options[node.chosen]
                if previous is not None and pid != previous and previous in enabled:
                    preemptions += 1
                return pid

            yield self._execute(index, choose)
            index += 1
            del path[depth:]
            while path:
                node = path[-1]
                alternative = _next_alternative(node, bound)
                if alternative is not None:
                    node.chosen = alternative
                    break
                path.pop()
            if not path:
                return
            if index >= self.budget:
                self.truncated = True
                return

    def _sampled(self) -> Iterator[Execution]:
        estimate = 64
        for index in range(self.budget):
            rng = random.Random(self.seed * 1_000_003 + index)
            if self.strategy is Strategy.RANDOM:
                def choose(enabled, _previous, _step, rng=rng):
                    return rng.choice(enabled)
            else:
                choose = _PctChooser(rng, self.pct_depth, estimate)
            execution = self._execute(index, choose)
            estimate = max(estimate, len(execution.schedule))
            yield execution

    def _directed(self) -> Iterator[Execution]:
        segments = self.schedule
        memory = SimulatedMemory(self.counter)
        programs, context = self.factory(memory)
        memory.freeze()
        processes, error = self._start(memory, programs)
        schedule: List[int] = []
        status = ExecutionStatus.COMPLETE if error is None else ExecutionStatus.ERROR
        for segment in segments:
            if status is not ExecutionStatus.COMPLETE:
                break
            proc = processes.get(segment.pid)
            if proc is None:
                raise SchedulerError(f"Directed schedule names unknown process {segment.pid}")
            if segment.steps is None and segment.ops is None:
                raise SchedulerError("Directed segment needs steps or ops")
            target_ops = proc.completed_ops + (segment.ops or 0)
            taken = 0
            while not proc.done:
                if segment.steps is not None and taken >= segment.steps:
                    break
                if segment.ops is not None and proc.completed_ops >= target_ops:
                    break
                if len(schedule) >= self.step_limit:
                    status = ExecutionStatus.STEP_LIMIT
                    break
                error = self._step(proc)
                schedule.append(proc.pid)
                taken += 1
                if error is not None:
                    status = ExecutionStatus.ERROR
                    break
        for pid, proc in processes.items():
            while not proc.done and status is ExecutionStatus.COMPLETE:
                if len(schedule) >= self.step_limit:
                    status = ExecutionStatus.STEP_LIMIT
                    break
                error = self._step(proc)
                schedule.append(pid)
                if error is not None:
                    status = ExecutionStatus.ERROR
        if status is not ExecutionStatus.COMPLETE:
            self._abort(processes)
        yield Execution(
            index=0,
            schedule=schedule,
            status=status,
            initial=memory.initial,
            final=memory.snapshot(),
            steps=memory.steps,
            notes=memory.notes,
            results={pid: proc.result for pid, proc in processes.items()},
            context=context,
            error=error,
        )


def _ordered(enabled: List[int], previous: Optional[int]) -> List[int]:
    if previous is not None and previous in enabled:
        return [previous] + [pid for pid in enabled if pid != previous]
    return list(enabled)


def _next_alternative(node: _Choice, bound: Optional[int]) -> Optional[int]:
    for i in range(node.chosen + 1, len(node.options)):
        cost = node.preemptions
        if node.previous is not None and node.previous in node.options and node.options[i] != node.previous:
            cost += 1
        if bound is None or cost <= bound:
            return i
    return None


class _PctChooser:
    """Probabilistic concurrency testing: random priorities with ``depth - 1`` change points."""

    def __init__(self, rng: random.Random, depth: int, estimate: int):
        self.rng = rng
        self.priorities: Dict[int, float] = {}
        self.change_points = sorted(rng.sample(range(1, max(2, estimate)), min(depth - 1, max(1, estimate) - 1)))
        self.lowered = 0

    def __call__(self, enabled: List[int], previous: Optional[int], step: int) -> int:
        for pid in enabled:
            if pid not in self.priorities:
                self.priorities[pid] = 1_000 + self.rng.random()
        while self.change_points and step >= self.change_points[0]:
            self.change_points.pop(0)
            if previous is not None:
                self.lowered += 1
                self.priorities[previous] = -self.lowered
        return max(enabled, key=lambda pid: self.priorities[pid])


def run_under_scheduler(
    program: ProgramFactory,
    strategy: Strategy = Strategy.EXHAUSTIVE,
    budget: Optional[int] = None,
    *,
    seed: int = 0,
    preemption_bound: Optional[int] = None,
    schedule: Optional[Sequence[Segment]] = None,
    keep_logs: bool = True,
    step_limit: int = DEFAULT_STEP_LIMIT,
    counter: Optional[StepCounter] = None,
) -> ExplorationResult:
    """Explore ``program`` and return its executions (step logs and final memories)."""
    scheduler = Scheduler(
        program,
        strategy=strategy,
        budget=budget,
        seed=seed,
        preemption_bound=preemption_bound,
        schedule=schedule,
        step_limit=step_limit,
        counter=counter,
    )
    kept = []
    for execution in scheduler.executions():
        if keep_logs:
            kept.append(execution)
    return ExplorationResult(
        strategy=scheduler.strategy,
        interleavings=scheduler.interleavings,
        truncated=scheduler.truncated,
        step_limited=scheduler.step_limited,
        errored=scheduler.errored,
        executions=kept,
    )
